//! Damped Newton iteration for `N̂(v) = 0`.
//!
//! The Jacobian `L + diag(2c₊e^{2v} + 2c₋e^{-2v})` is symmetric positive
//! definite on free nodes, so each step is one preconditioned CG solve.
//! Steps are halved until the L∞ norm of the scaled residual decreases.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::barrier::BarrierPair;
use crate::scalar::{max_abs, Real};
use crate::solver::monotone::increment;
use crate::solver::operator::SemilinearProblem;
use crate::solver::SolveReport;

#[derive(Clone, Debug)]
pub struct NewtonOptions<T> {
    /// Target for the L∞ norm of the scaled residual.
    pub tol: T,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub linear_tol: T,
}

impl<T: Real> NewtonOptions<T> {
    pub fn new(tol: T) -> Self {
        Self { tol, max_iterations: 60, max_halvings: 30, linear_tol: T::lit(1e-13) }
    }
}

/// Newton iteration from `init`. With `barriers`, iterates are clamped to
/// `[v⁻, v⁺]` after every step.
pub fn newton_solve<T: Real>(
    problem: &SemilinearProblem<T>,
    init: &[T],
    barriers: Option<&BarrierPair<T>>,
    opts: &NewtonOptions<T>,
) -> Result<(Vec<T>, SolveReport<T>)> {
    let start = Instant::now();
    let n = problem.len();
    if init.len() != n {
        return Err(Error::invalid("initial guess does not match the problem"));
    }
    let clamp = |v: &mut Vec<T>| {
        if let Some(b) = barriers {
            for i in 0..n {
                if !problem.fixed[i] {
                    v[i] = v[i].max(b.v_minus[i]).min(b.v_plus[i]);
                }
            }
        }
    };
    let mut v = init.to_vec();
    for i in 0..n {
        if problem.fixed[i] {
            v[i] = problem.boundary[i];
        }
    }
    clamp(&mut v);
    let mut res = max_abs(&problem.scaled_residual(&v));
    let mut report = SolveReport { final_residual: res, residuals: vec![res], ..SolveReport::default() };
    let two = T::lit(2.0);
    while res > opts.tol {
        if report.iterations >= opts.max_iterations {
            return Err(Error::NonConvergence {
                what: "Newton iteration".into(),
                iterations: report.iterations,
                last_residual: res.to_f64_lossy(),
                history: report.residuals.iter().map(|r| r.to_f64_lossy()).collect(),
            });
        }
        let jac: Vec<T> = (0..n)
            .map(|i| if problem.fixed[i] { T::zero() } else { problem.nonlinear_derivative_at(i, v[i]) })
            .collect();
        let (delta, lin) = increment(problem, &v, &jac, opts.linear_tol)?;
        report.linear_iterations += lin;
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial: Vec<T> = v.iter().zip(&delta).map(|(&a, &d)| a + step * d).collect();
            clamp(&mut trial);
            let r = max_abs(&problem.scaled_residual(&trial));
            if r.is_finite() && r < res {
                accepted = Some((trial, r));
                break;
            }
            step = step / two;
        }
        let Some((trial, r)) = accepted else {
            return Err(Error::NonConvergence {
                what: "Newton line search failed; start from monotone_iterate output instead".into(),
                iterations: report.iterations,
                last_residual: res.to_f64_lossy(),
                history: report.residuals.iter().map(|r| r.to_f64_lossy()).collect(),
            });
        };
        let change = (0..n).map(|i| (trial[i] - v[i]).abs()).fold(T::zero(), T::max);
        v = trial;
        res = r;
        report.iterations += 1;
        report.residuals.push(res);
        report.changes.push(change);
        report.bracketed.push(barriers.is_none_or(|b| (0..n).all(|i| b.v_minus[i] <= v[i] && v[i] <= b.v_plus[i])));
    }
    report.final_residual = res;
    report.wall_time = start.elapsed();
    Ok((v, report))
}

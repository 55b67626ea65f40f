//! Two-sided monotone iteration between a subsolution and a supersolution.
//!
//! Both sequences `l_j ↑` and `u_j ↓` take the step
//! `(L + λ_j) w_{j+1} = λ_j w_j - F(w_j)` where `F` is the nonlinear part of
//! `N̂` and `λ_j ≥ max_{[l_j, u_j]} ∂_v F` nodewise. Each step is solved for
//! the increment `w_{j+1} - w_j`, whose right-hand side is `-N̂(w_j)`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::barrier::BarrierPair;
use crate::scalar::{max_abs, Real};
use crate::solver::linear::{linear_solve, ShiftedOperator};
use crate::solver::operator::SemilinearProblem;
use crate::solver::SolveReport;

/// Safety factor on the derivative bound.
pub const LAMBDA_FACTOR: f64 = 1.1;
/// Absolute slack in the monotonicity and bracketing tests.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct MonotoneOptions<T> {
    pub tol: T,
    pub max_iterations: usize,
    /// Fixed shift instead of the per-iteration bound.
    pub lambda: Option<T>,
    pub linear_tol: T,
}

impl<T: Real> MonotoneOptions<T> {
    pub fn new(tol: T) -> Self {
        Self { tol, max_iterations: 2000, lambda: None, linear_tol: T::lit(1e-12) }
    }
}

#[derive(Clone, Debug)]
pub struct MonotoneSolution<T> {
    /// Limit of the increasing sequence.
    pub lower: Vec<T>,
    /// Limit of the decreasing sequence.
    pub upper: Vec<T>,
    pub report: SolveReport<T>,
}

impl<T: Real> MonotoneSolution<T> {
    pub fn midpoint(&self) -> Vec<T> {
        self.lower.iter().zip(&self.upper).map(|(&a, &b)| (a + b) / T::lit(2.0)).collect()
    }
}

/// `λ_i = 1.1 (2c₊ e^{2u_i} + 2c₋ e^{-2l_i})`.
pub fn shift_bound<T: Real>(problem: &SemilinearProblem<T>, lower: &[T], upper: &[T]) -> Vec<T> {
    let two = T::lit(2.0);
    let k = T::lit(LAMBDA_FACTOR);
    (0..problem.len())
        .map(|i| {
            if problem.fixed[i] {
                T::zero()
            } else {
                k * two * (problem.c_plus[i] * (two * upper[i]).exp() + problem.c_minus[i] * (-two * lower[i]).exp())
            }
        })
        .collect()
}

/// One increment `δ` with `(L + λ) δ = -N̂(w)` on free nodes and
/// `w + δ = data` on Dirichlet nodes.
pub(crate) fn increment<T: Real>(
    problem: &SemilinearProblem<T>,
    w: &[T],
    shift: &[T],
    linear_tol: T,
) -> Result<(Vec<T>, usize)> {
    let n = problem.len();
    let fixed_part: Vec<T> = (0..n).map(|i| if problem.fixed[i] { problem.boundary[i] - w[i] } else { T::zero() }).collect();
    let resid = problem.residual(w);
    let rhs: Vec<T> = (0..n)
        .map(|i| if problem.fixed[i] { T::zero() } else { -resid[i] - problem.lap.apply_at(&fixed_part, i) })
        .collect();
    let op = ShiftedOperator { lap: &problem.lap, kappa: T::one(), shift, fixed: &problem.fixed };
    let sol = linear_solve(&problem.grid, &op, &rhs, linear_tol)?;
    let delta = (0..n).map(|i| if problem.fixed[i] { fixed_part[i] } else { sol.x[i] }).collect();
    Ok((delta, sol.iterations))
}

/// Runs both sequences from `barriers.v_minus` and `barriers.v_plus` until
/// the larger of their L∞ changes is at most `opts.tol`.
pub fn monotone_iterate<T: Real>(
    problem: &SemilinearProblem<T>,
    barriers: &BarrierPair<T>,
    opts: &MonotoneOptions<T>,
) -> Result<MonotoneSolution<T>> {
    let start = Instant::now();
    let n = problem.len();
    if barriers.v_minus.len() != n || barriers.v_plus.len() != n {
        return Err(Error::invalid("barriers and problem live on different grids"));
    }
    let slack = T::lit(MONOTONE_SLACK);
    let mut lower = barriers.v_minus.clone();
    let mut upper = barriers.v_plus.clone();
    if (0..n).any(|i| lower[i] > upper[i]) {
        return Err(Error::InvariantViolation("v⁻ exceeds v⁺".into()));
    }
    let mut report = SolveReport { final_residual: T::infinity(), ..SolveReport::default() };
    for it in 0..opts.max_iterations {
        let shift = match opts.lambda {
            Some(l) => (0..n).map(|i| if problem.fixed[i] { T::zero() } else { l }).collect(),
            None => shift_bound(problem, &lower, &upper),
        };
        if let Some(i) = (0..n).find(|&i| !shift[i].is_finite()) {
            return Err(Error::NonConvergence {
                what: format!("monotone iteration (shift overflows at node {i}; barriers too large for e^{{2v}})"),
                iterations: it,
                last_residual: report.final_residual.to_f64_lossy(),
                history: report.residuals.iter().map(|r| r.to_f64_lossy()).collect(),
            });
        }
        let (dl, il) = increment(problem, &lower, &shift, opts.linear_tol)?;
        let (du, iu) = increment(problem, &upper, &shift, opts.linear_tol)?;
        report.linear_iterations += il + iu;
        let mut monotone = true;
        let mut bracketed = true;
        for i in 0..n {
            lower[i] = lower[i] + dl[i];
            upper[i] = upper[i] + du[i];
            let s = slack * (T::one() + lower[i].abs().max(upper[i].abs()));
            if !problem.fixed[i] && (dl[i] < -s || du[i] > s) {
                monotone = false;
            }
            if lower[i] < barriers.v_minus[i] - s || upper[i] > barriers.v_plus[i] + s || lower[i] > upper[i] + s {
                bracketed = false;
            }
        }
        let change = max_abs(&dl).max(max_abs(&du));
        let res = max_abs(&problem.scaled_residual(&lower)).max(max_abs(&problem.scaled_residual(&upper)));
        report.iterations = it + 1;
        report.changes.push(change);
        report.residuals.push(res);
        report.monotone.push(monotone);
        report.bracketed.push(bracketed);
        report.final_residual = res;
        if !monotone {
            return Err(Error::InvariantViolation(format!(
                "monotone iteration lost monotonicity at step {}: the shift is too small or the barriers are invalid",
                it + 1
            )));
        }
        if change <= opts.tol {
            report.wall_time = start.elapsed();
            return Ok(MonotoneSolution { lower, upper, report });
        }
    }
    Err(Error::NonConvergence {
        what: "monotone iteration".into(),
        iterations: opts.max_iterations,
        last_residual: report.changes.last().map_or(f64::NAN, |c| c.to_f64_lossy()),
        history: report.changes.iter().map(|c| c.to_f64_lossy()).collect(),
    })
}

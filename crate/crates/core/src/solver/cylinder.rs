//! The scalar equation on `Σ x [0, y_max]` (or on the `y` line alone).
//!
//! The unknown is `v = u - û` with `v = 0` on `y = 0` and `v = u_∞ - û` on
//! the top face, where `u_∞` solves the limiting surface equation. The
//! remainder problem is solved by two-sided monotone iteration between the
//! spliced barriers and polished by Newton.

use std::sync::Arc;

use crate::domain::{DomainKind, GradedGrid, ScalarField};
use crate::error::{Error, Result};
use crate::higgs::HiggsData;
use crate::model::approx::{build_approximate, ApproxOptions, ApproximateSolution, FarField};
use crate::model::barrier::{build_barriers, search_barriers, verify_barrier, BarrierPair, BarrierParams, BarrierReport};
use crate::scalar::Real;
use crate::solver::monotone::{monotone_iterate, MonotoneOptions};
use crate::solver::newton::{newton_solve, NewtonOptions};
use crate::solver::operator::{assemble_problem, Mode, SemilinearProblem};
use crate::solver::surface::{constant_limit, solve_limit_surface};
use crate::solver::SolveReport;

pub const DEFAULT_EPSILON: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct CylinderOptions<T> {
    pub tol: T,
    pub approx: ApproxOptions<T>,
    /// `false` keeps `û` in its boundary form up to the top face with `v = 0`
    /// there.
    pub use_limit: bool,
    pub eps: T,
    pub barrier: Option<BarrierParams<T>>,
    pub lambda: Option<T>,
    pub max_iterations: usize,
    /// Newton polish after the monotone phase.
    pub polish: bool,
}

impl<T: Real> CylinderOptions<T> {
    pub fn new(tol: T) -> Self {
        Self {
            tol,
            approx: ApproxOptions::default(),
            use_limit: true,
            eps: T::lit(DEFAULT_EPSILON),
            barrier: None,
            lambda: None,
            max_iterations: 2000,
            polish: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CylinderSolution<T> {
    /// `u = û + v` on the grid without `y = 0`.
    pub u: ScalarField<T>,
    /// `v` on the full grid.
    pub v: ScalarField<T>,
    /// Limits of the increasing and decreasing monotone sequences.
    pub v_lower: Vec<T>,
    pub v_upper: Vec<T>,
    pub u_inf: Vec<T>,
    pub barriers: BarrierPair<T>,
    pub barrier_report: BarrierReport<T>,
    pub monotone: SolveReport<T>,
    pub newton: Option<SolveReport<T>>,
    pub problem: SemilinearProblem<T>,
    pub approx: ApproximateSolution<T>,
}

/// Limiting data `u_∞` on the horizontal nodes of `grid`.
pub fn limit_data<T: Real>(data: &HiggsData<T>, grid: &GradedGrid<T>, tol: T) -> Result<Vec<T>> {
    match grid.kind {
        DomainKind::OdeLine => {
            let k = data.curvature.constant_value();
            let a = match &data.alpha {
                crate::higgs::AlphaSource::Field(c) => c.constant_value(),
                crate::higgs::AlphaSource::Poly(_) => None,
            };
            let b = data.beta_sq.constant_value();
            match (k, a, b) {
                (Some(k), Some(a), Some(b)) => Ok(vec![constant_limit(k, a, b)?]),
                _ => Err(Error::invalid("line problems need constant coefficients")),
            }
        }
        DomainKind::TorusHalfCylinder => {
            let g2 = Arc::new(grid.horizontal_grid()?);
            Ok(solve_limit_surface(data, g2, tol)?.u.into_values())
        }
        _ => Err(Error::invalid("half-cylinder solves need a half-cylinder or line grid")),
    }
}

/// `y_max = 6 / sqrt(2 r)` with `r` the smallest decay rate
/// `sqrt(2|α|²e^{2u_∞} + 2|β|²e^{-2u_∞})` of the linearisation at `u_∞`.
pub fn default_y_max<T: Real>(data: &HiggsData<T>, u_inf: &[T], horizontal: &GradedGrid<T>) -> T {
    let two = T::lit(2.0);
    let rate = (0..u_inf.len())
        .map(|h| {
            let a = data.alpha_sq(h, horizontal.z_of_horizontal(h));
            (two * a * (two * u_inf[h]).exp() + two * data.beta_sq.at(h) * (-two * u_inf[h]).exp()).sqrt()
        })
        .filter(|&r| r > T::zero())
        .fold(T::infinity(), T::min);
    T::lit(6.0) / (two * rate).sqrt()
}

/// Solves the remainder problem on `grid` (which must include `y = 0`).
pub fn solve_half_cylinder<T: Real>(
    data: &HiggsData<T>,
    grid: Arc<GradedGrid<T>>,
    opts: &CylinderOptions<T>,
) -> Result<CylinderSolution<T>> {
    if !matches!(grid.kind, DomainKind::TorusHalfCylinder | DomainKind::OdeLine) {
        return Err(Error::invalid("solve_half_cylinder needs a half-cylinder or line grid"));
    }
    data.validate_for(&grid)?;
    let u_inf = if opts.use_limit { limit_data(data, &grid, opts.tol.min(T::lit(1e-12)))? } else { vec![T::zero(); grid.horizontal_len()] };
    let far = if opts.use_limit { FarField::Limit(u_inf.clone()) } else { FarField::NahmModel };
    let approx = build_approximate(&grid, data, &opts.approx, &far)?;
    let problem = assemble_problem(grid.clone(), data, &approx, Mode::Cylinder)?;
    let (barriers, barrier_report) = match opts.barrier {
        Some(p) => {
            let pair = build_barriers(&grid, p, &[])?;
            let report = verify_barrier(&problem, &pair);
            (pair, report)
        }
        None => search_barriers(&problem, opts.eps, &[])?,
    };
    let mut mopts = MonotoneOptions::new(opts.tol);
    mopts.lambda = opts.lambda;
    mopts.max_iterations = opts.max_iterations;
    let mono = monotone_iterate(&problem, &barriers, &mopts)?;
    let (v, newton) = if opts.polish {
        let (v, rep) = newton_solve(&problem, &mono.midpoint(), Some(&barriers), &NewtonOptions::new(opts.tol))?;
        (v, Some(rep))
    } else {
        (mono.midpoint(), None)
    };
    let u = problem.reconstruct(&v)?;
    Ok(CylinderSolution {
        u,
        v: ScalarField::new(grid, v)?,
        v_lower: mono.lower,
        v_upper: mono.upper,
        u_inf,
        barriers,
        barrier_report,
        monotone: mono.report,
        newton,
        problem,
        approx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec, Grading};
    use crate::model::ode::solve_mikhaylov_ode;

    #[test]
    fn flat_nahm_pole_is_exact() {
        let spec = DomainSpec::torus_half_cylinder(1.0, 1.0, 3.0);
        let g = Arc::new(build_grid(&spec, &[8, 8, 24], Grading::default()).unwrap());
        let data = HiggsData::constant(0.0, 1.0, 0.0);
        let mut opts = CylinderOptions::new(1e-11);
        opts.use_limit = false;
        let s: CylinderSolution<f64> = solve_half_cylinder(&data, g, &opts).unwrap();
        assert!(s.v.values().iter().all(|v| v.abs() < 1e-10));
        for (i, u) in s.u.values().iter().enumerate() {
            assert!((u + s.u.grid().y(i).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn line_problem_matches_ode() {
        let spec = DomainSpec::ode_line(12.0);
        let ode = solve_mikhaylov_ode(1e-12).unwrap();
        let mut errs = vec![];
        for n in [64, 128, 256] {
            let g = Arc::new(build_grid(&spec, &[n], Grading::default()).unwrap());
            let s: CylinderSolution<f64> = solve_half_cylinder(&HiggsData::constant(-1.0, 1.0, 0.0), g, &CylinderOptions::new(1e-11)).unwrap();
            assert!(s.monotone.all_monotone() && s.monotone.all_bracketed());
            let err = (0..s.u.values().len())
                .map(|i| (s.u.values()[i] - ode.eval(s.u.grid().y(i)).unwrap()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.8, "{errs:?}");
    }
}

//! `-(Δ + ∂_y²) u + |p(z)|² e^{2u} = 0` on `C x R+` with knots at the roots
//! of `p`, truncated to a box with far-field data `U_{N₀}(z - c) - log|lead|`
//! on its lateral and top faces.
//!
//! When `p = c (z - a)^n` the problem is rotationally symmetric about `a` and
//! is solved on an `(r, y)` slab instead.

use std::sync::Arc;

use num_complex::Complex;

use crate::domain::{build_grid, DomainKind, DomainSpec, GradedGrid, Grading, KnotPoint, ScalarField};
use crate::error::{Error, Result};
use crate::higgs::{HiggsData, Polynomial};
use crate::model::approx::{build_approximate, ApproxOptions, ApproximateSolution, FarField};
use crate::model::barrier::{
    build_barriers, epsilon_bound, knot_profiles, search_barriers, verify_barrier, BarrierPair, BarrierParams,
    BarrierReport,
};
use crate::scalar::Real;
use crate::solver::monotone::{monotone_iterate, MonotoneOptions};
use crate::solver::newton::{newton_solve, NewtonOptions};
use crate::solver::operator::{assemble_problem, Mode, SemilinearProblem};
use crate::solver::SolveReport;

#[derive(Clone, Debug)]
pub struct PlaneOptions<T> {
    pub tol: T,
    /// Node counts: `(n_r, n_y)` on the axisymmetric path, `(n_x, n_x', n_y)`
    /// otherwise. Two-entry input on a non-symmetric problem is an error.
    pub resolution: Vec<usize>,
    pub grading: Grading<T>,
    pub knot_radius: Option<T>,
    /// Fraction of `min(1, δ₀⁺)` used for `ε`.
    pub eps_fraction: T,
    pub barrier: Option<BarrierParams<T>>,
    pub lambda: Option<T>,
    pub max_iterations: usize,
    pub polish: bool,
    /// Allow the axisymmetric fast path.
    pub allow_axisym: bool,
}

impl<T: Real> PlaneOptions<T> {
    pub fn new(tol: T, resolution: Vec<usize>) -> Self {
        Self {
            tol,
            resolution,
            grading: Grading::default(),
            knot_radius: None,
            eps_fraction: T::lit(0.5),
            barrier: None,
            lambda: None,
            max_iterations: 4000,
            polish: true,
            allow_axisym: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlaneSolution<T> {
    pub u: ScalarField<T>,
    pub v: ScalarField<T>,
    pub v_lower: Vec<T>,
    pub v_upper: Vec<T>,
    /// Whether the `(r, y)` path was used; `r` is then measured from `center`.
    pub axisymmetric: bool,
    pub center: Complex<T>,
    pub barriers: BarrierPair<T>,
    pub barrier_report: BarrierReport<T>,
    pub monotone: SolveReport<T>,
    pub newton: Option<SolveReport<T>>,
    pub problem: SemilinearProblem<T>,
    pub approx: ApproximateSolution<T>,
    pub data: HiggsData<T>,
}

/// `Some((a, n))` when `p = c (z - a)^n` to within the root tolerance.
pub fn single_center<T: Real>(p: &Polynomial<T>) -> Option<(Complex<T>, usize)> {
    let n = p.degree();
    if n == 0 {
        return Some((Complex::new(T::zero(), T::zero()), 0));
    }
    let a = -p.coeffs[n - 1] / (p.leading() * T::of(n));
    let (_, rem) = p.deflate(a, n);
    if rem <= T::lit(crate::higgs::ROOT_TOLERANCE) {
        Some((a, n))
    } else {
        None
    }
}

/// Solves the plane problem for `p` with the given knots inside `spec`.
pub fn solve_knot_plane<T: Real>(p: &Polynomial<T>, spec: &DomainSpec<T>, opts: &PlaneOptions<T>) -> Result<PlaneSolution<T>> {
    if spec.kind != DomainKind::PlaneHalfSpace && spec.kind != DomainKind::AxisymSlab {
        return Err(Error::invalid("plane solves need a PlaneHalfSpace or AxisymSlab domain"));
    }
    spec.validate()?;
    HiggsData::plane(p.clone(), spec.knots.clone())?;
    let symmetric = if opts.allow_axisym { single_center(p) } else { None };
    let (grid, data, center) = match symmetric {
        Some((a, n)) if opts.resolution.len() == 2 || spec.kind == DomainKind::AxisymSlab => {
            let shifted = p.shifted(a);
            let knots = if n == 0 { vec![] } else { vec![KnotPoint::new(Complex::new(T::zero(), T::zero()), n)?] };
            let r_max = spec.extents[0];
            let mut slab = DomainSpec::axisym_slab(r_max, spec.y_max, n);
            slab.knots = knots.clone();
            let g = build_grid(&slab, &opts.resolution, opts.grading)?;
            (g, HiggsData::plane(shifted, knots)?, a)
        }
        _ => {
            if spec.kind != DomainKind::PlaneHalfSpace {
                return Err(Error::UnsupportedData("an axisymmetric slab needs p = c (z - a)^n".into()));
            }
            let g = build_grid(spec, &opts.resolution, opts.grading)?;
            (g, HiggsData::plane(p.clone(), spec.knots.clone())?, Complex::new(T::zero(), T::zero()))
        }
    };
    let grid = Arc::new(grid);
    let mode = if grid.is_axisymmetric() { Mode::Axisym } else { Mode::Plane };
    let aopts = ApproxOptions { knot_radius: opts.knot_radius, ..ApproxOptions::default() };
    let approx = build_approximate(&grid, &data, &aopts, &FarField::KnotModel)?;
    let problem = assemble_problem(grid.clone(), &data, &approx, mode)?;
    let profiles = knot_profiles(&data.knots)?;
    let eps = opts.eps_fraction * epsilon_bound(&profiles);
    let (barriers, barrier_report) = match opts.barrier {
        Some(params) => {
            let pair = build_barriers(&grid, params, &profiles)?;
            let report = verify_barrier(&problem, &pair);
            (pair, report)
        }
        None => search_barriers(&problem, eps, &profiles)?,
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
    Ok(PlaneSolution {
        u,
        v: ScalarField::new(grid.clone(), v)?,
        v_lower: mono.lower,
        v_upper: mono.upper,
        axisymmetric: grid.is_axisymmetric(),
        center,
        barriers,
        barrier_report,
        monotone: mono.report,
        newton,
        problem,
        approx,
        data,
    })
}

/// Grid-independent view: `u` at a physical point `(z, y)` of the solution
/// grid, `None` off the nodes.
pub fn node_of<T: Real>(grid: &GradedGrid<T>, z: Complex<T>, y: T) -> Option<usize> {
    (0..grid.len()).find(|&i| (grid.z(i) - z).norm() < T::lit(1e-12) && (grid.y(i) - y).abs() < T::lit(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::closed_form::un_value;

    #[test]
    fn constant_polynomial_gives_nahm_pole() {
        let spec = DomainSpec::plane_half_space(2.0, 2.0, vec![]);
        let p = Polynomial::real(&[1.0]).unwrap();
        let s: PlaneSolution<f64> = solve_knot_plane(&p, &spec, &PlaneOptions::new(1e-11, vec![17, 17])).unwrap();
        assert!(s.axisymmetric);
        for (i, u) in s.u.values().iter().enumerate() {
            assert!((u + s.u.grid().y(i).ln()).abs() < 1e-10);
        }
        assert!(s.newton.unwrap().final_residual <= 1e-10);
    }

    #[test]
    fn linear_polynomial_approaches_model() {
        let knots = vec![KnotPoint::at(0.0, 0.0, 1).unwrap()];
        let spec = DomainSpec::plane_half_space(2.0, 2.0, knots);
        let p = Polynomial::real(&[0.0, 1.0]).unwrap();
        let s: PlaneSolution<f64> = solve_knot_plane(&p, &spec, &PlaneOptions::new(1e-10, vec![33, 33])).unwrap();
        assert!(s.monotone.all_monotone() && s.monotone.all_bracketed());
        let g = s.u.grid();
        let err = (0..g.len()).map(|i| (s.u.values()[i] - un_value(1, g.z(i).re, g.y(i))).abs()).fold(0.0, f64::max);
        assert!(err < 5e-2, "{err}");
    }

    #[test]
    fn inconsistent_knots_rejected() {
        let knots = vec![KnotPoint::at(0.5, 0.0, 1).unwrap()];
        let spec = DomainSpec::plane_half_space(2.0, 2.0, knots);
        let p = Polynomial::real(&[0.0, 1.0]).unwrap();
        assert!(solve_knot_plane(&p, &spec, &PlaneOptions::new(1e-10, vec![17, 17])).is_err());
    }
}

//! The limiting surface equation `K - Δ_{g0} w + |α|² e^{2w} - |β|² e^{-2w} = 0`.
//!
//! Barriers: `w⁻ = ψ₁ - A` with `Δψ₁ = K - K̄`, and `w⁺ = ψ₂ + A` with
//! `Δψ₂ = K - K̄ + t(|α|² - B)`, `B` the mean of `|α|²` and
//! `t = max(1, 2(|K̄| + max|β|²)/B)`. Then `N(w⁻) = K̄ + |α|²e^{2w⁻} - |β|²e^{-2w⁻}`
//! and `N(w⁺) ≥ K̄ + tB - max|β|²` once `e^{2w⁺} ≥ t`, so both signs follow
//! for `A` large whenever `K̄ < 0` or `β ≠ 0`.

use std::sync::Arc;

use crate::domain::{GradedGrid, ScalarField};
use crate::error::{Error, Result};
use crate::higgs::HiggsData;
use crate::model::barrier::{BarrierPair, BarrierParams};
use crate::scalar::Real;
use crate::solver::linear::{linear_solve, ShiftedOperator};
use crate::solver::monotone::{monotone_iterate, MonotoneOptions};
use crate::solver::newton::{newton_solve, NewtonOptions};
use crate::solver::operator::{assemble_surface, SemilinearProblem};
use crate::solver::SolveReport;

#[derive(Clone, Debug)]
pub struct SurfaceSolution<T> {
    pub u: ScalarField<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// Barrier offset `A` that verified.
    pub barrier_offset: T,
    pub mean_curvature: T,
    pub monotone: SolveReport<T>,
    pub newton: SolveReport<T>,
}

fn weighted_mean<T: Real>(problem: &SemilinearProblem<T>, f: &[T]) -> T {
    let w = &problem.lap.sym_weight;
    let total: T = w.iter().copied().sum();
    (0..f.len()).map(|i| w[i] * f[i]).sum::<T>() / total
}

/// Removes the rounding-level mean left by the subtractions above.
fn centered<T: Real>(problem: &SemilinearProblem<T>, mut f: Vec<T>) -> Vec<T> {
    let m = weighted_mean(problem, &f);
    for v in &mut f {
        *v = *v - m;
    }
    f
}

/// Solves `L ψ = -rhs`, i.e. `Δ_{g0} ψ = rhs`, for mean-zero `rhs`.
fn poisson<T: Real>(problem: &SemilinearProblem<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = problem.len();
    let zero = vec![T::zero(); n];
    let op = ShiftedOperator { lap: &problem.lap, kappa: T::one(), shift: &zero, fixed: &problem.fixed };
    let neg: Vec<T> = rhs.iter().map(|&r| -r).collect();
    Ok(linear_solve(&problem.grid, &op, &neg, T::lit(1e-13))?.x)
}

pub const SURFACE_SEARCH_MAX_EXPONENT: i32 = 8;

/// Solves the limiting surface equation on a `LimitSurface` grid.
pub fn solve_limit_surface<T: Real>(data: &HiggsData<T>, grid: Arc<GradedGrid<T>>, tol: T) -> Result<SurfaceSolution<T>> {
    let problem = assemble_surface(grid.clone(), data)?;
    let n = problem.len();
    if problem.c_plus.iter().all(|&a| a == T::zero()) {
        return Err(Error::UnsupportedData("unstable data: |α|² vanishes identically".into()));
    }
    let k: Vec<T> = (0..n).map(|h| data.curvature.at(h)).collect();
    let k_bar = weighted_mean(&problem, &k);
    let b = weighted_mean(&problem, &problem.c_plus);
    let beta_max = problem.c_minus.iter().copied().fold(T::zero(), T::max);
    if !(k_bar < T::zero()) && beta_max == T::zero() {
        return Err(Error::UnsupportedData(
            "unstable data: no subsolution exists when the mean curvature is nonnegative and β vanishes".into(),
        ));
    }
    let two = T::lit(2.0);
    let t = T::one().max(two * (k_bar.abs() + beta_max) / b);
    let r1: Vec<T> = k.iter().map(|&x| x - k_bar).collect();
    let r2: Vec<T> = (0..n).map(|i| r1[i] + t * (problem.c_plus[i] - b)).collect();
    let (r1, r2) = (centered(&problem, r1), centered(&problem, r2));
    let psi1 = poisson(&problem, &r1)?;
    let psi2 = poisson(&problem, &r2)?;
    let slack = T::lit(1e-10);
    let mut found = None;
    for e in -4..=SURFACE_SEARCH_MAX_EXPONENT {
        let a = T::lit(2f64.powi(e));
        let lo: Vec<T> = psi1.iter().map(|&p| p - a).collect();
        let hi: Vec<T> = psi2.iter().map(|&p| p + a).collect();
        let rl = problem.residual(&lo);
        let rh = problem.residual(&hi);
        let ok = (0..n).all(|i| {
            let scale = T::one() + problem.c_plus[i] + problem.c_minus[i] + problem.f[i].abs();
            rl[i] <= slack * scale && rh[i] >= -slack * scale && lo[i] <= hi[i]
        });
        if ok {
            found = Some((a, lo, hi));
            break;
        }
    }
    let Some((a, lo, hi)) = found else {
        return Err(Error::InvariantViolation("surface barriers failed to verify".into()));
    };
    let pair = BarrierPair {
        v_minus: lo,
        v_plus: hi,
        params: BarrierParams { a, a_prime: a, a_dprime: a, eps: T::zero() },
        active: vec![],
        constituents: vec![],
    };
    let mut mopts = MonotoneOptions::new(tol.max(T::lit(1e-10)));
    mopts.max_iterations = 500;
    let mono = monotone_iterate(&problem, &pair, &mopts)?;
    let (u, newton) = newton_solve(&problem, &mono.midpoint(), Some(&pair), &NewtonOptions::new(tol))?;
    Ok(SurfaceSolution {
        u: ScalarField::new(grid, u)?,
        lower: mono.lower,
        upper: mono.upper,
        barrier_offset: a,
        mean_curvature: k_bar,
        monotone: mono.report,
        newton,
    })
}

/// Constant solution of `K + |α|² e^{2w} - |β|² e^{-2w} = 0`:
/// `e^{2w} = (-K + sqrt(K² + 4|α|²|β|²)) / (2|α|²)`.
pub fn constant_limit<T: Real>(k: T, alpha_sq: T, beta_sq: T) -> Result<T> {
    if !(alpha_sq > T::zero()) {
        return Err(Error::UnsupportedData("unstable data: |α|² vanishes identically".into()));
    }
    let disc = (k * k + T::lit(4.0) * alpha_sq * beta_sq).sqrt();
    let x = if k < T::zero() { (-k + disc) / (T::lit(2.0) * alpha_sq) } else { T::lit(2.0) * beta_sq / (k + disc) };
    if !(x > T::zero()) {
        return Err(Error::UnsupportedData("unstable data: no constant limit".into()));
    }
    Ok(T::lit(0.5) * x.ln())
}

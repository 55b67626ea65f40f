//! Barrier pairs for the remainder equation `N̂(v) = 0`.
//!
//! Without knots `v⁺ = min{A y^ε, A′ e^{-εy}}`; with knots
//! `v⁺ = min{A R^ε μ₀(ψ), A′ y^{ε/2}, A″ e^{-εy}}` where `(R, ψ)` are
//! spherical coordinates about each knot and `μ₀` is the ground state of the
//! hemisphere operator. In both cases `v⁻ = -v⁺`.
//!
//! The discrete operator is an M-matrix, so the nodal minimum of discrete
//! supersolutions is again one; verification therefore evaluates `N̂` on
//! each constituent at the nodes where it is the active one.

use num_complex::Complex;

use crate::domain::{spherical_coords, GradedGrid, KnotPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::solver::operator::SemilinearProblem;
use crate::spectral::{eigen_j, indicial_radial, Spectrum};

/// Ground state of the hemisphere operator for one knot.
#[derive(Clone, Debug)]
pub struct KnotProfile<T> {
    pub knot: KnotPoint<T>,
    pub spectrum: Spectrum<T>,
    pub delta_plus: T,
}

pub const PROFILE_RESOLUTION: usize = 64;

/// Computes `μ₀` and `δ₀⁺` for every knot.
pub fn knot_profiles<T: Real>(knots: &[KnotPoint<T>]) -> Result<Vec<KnotProfile<T>>> {
    knots
        .iter()
        .map(|k| {
            let spectrum = eigen_j(k.order, 0, 1, PROFILE_RESOLUTION)?;
            let delta_plus = indicial_radial(spectrum.values[0])?.0;
            Ok(KnotProfile { knot: k.clone(), spectrum, delta_plus })
        })
        .collect()
}

/// Upper end of the admissible `ε` interval, `min(1, δ₀⁺)`.
pub fn epsilon_bound<T: Real>(profiles: &[KnotProfile<T>]) -> T {
    profiles.iter().fold(T::one(), |m, p| m.min(p.delta_plus))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierParams<T> {
    pub a: T,
    pub a_prime: T,
    pub a_dprime: T,
    pub eps: T,
}

/// One smooth piece of the spliced barrier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constituent {
    /// `A y^ε` (no knots).
    Power,
    /// `A′ y^{ε/2}` (with knots).
    SlowPower,
    /// `A′ e^{-εy}` without knots, `A″ e^{-εy}` with knots.
    Decay,
    /// `A R^ε μ₀(ψ)` about knot `j`.
    Cone(usize),
}

#[derive(Clone, Debug)]
pub struct BarrierPair<T> {
    pub v_minus: Vec<T>,
    pub v_plus: Vec<T>,
    pub params: BarrierParams<T>,
    /// Constituent attaining the minimum at each node.
    pub active: Vec<Constituent>,
    pub constituents: Vec<(Constituent, Vec<T>)>,
}

fn constituent_values<T: Real>(
    grid: &GradedGrid<T>,
    c: Constituent,
    p: &BarrierParams<T>,
    profiles: &[KnotProfile<T>],
) -> Result<Vec<T>> {
    let eps = p.eps;
    let half = T::lit(0.5);
    (0..grid.len())
        .map(|i| {
            let y = grid.y(i);
            Ok(match c {
                Constituent::Power => p.a * y.powf(eps),
                Constituent::SlowPower => p.a_prime * y.powf(half * eps),
                Constituent::Decay => {
                    let scale = if profiles.is_empty() { p.a_prime } else { p.a_dprime };
                    scale * (-eps * y).exp()
                }
                Constituent::Cone(j) => {
                    let prof = &profiles[j];
                    let z: Complex<T> = grid.z(i);
                    if (z - prof.knot.position).norm() == T::zero() && y == T::zero() {
                        T::zero()
                    } else {
                        let s = spherical_coords(z, y, &prof.knot)?;
                        p.a * s.radius.powf(eps) * prof.spectrum.ground_state_at(s.psi)
                    }
                }
            })
        })
        .collect()
}

/// Builds the spliced barrier pair on `grid`.
pub fn build_barriers<T: Real>(
    grid: &GradedGrid<T>,
    params: BarrierParams<T>,
    profiles: &[KnotProfile<T>],
) -> Result<BarrierPair<T>> {
    let bound = epsilon_bound(profiles);
    if !(params.eps > T::zero() && params.eps < bound) {
        let dp = profiles.iter().map(|p| p.delta_plus.to_f64_lossy()).fold(f64::INFINITY, f64::min);
        return Err(Error::invalid(format!(
            "ε = {} must lie in (0, {}) (δ₀⁺ = {})",
            params.eps.to_f64_lossy(),
            bound.to_f64_lossy(),
            if dp.is_finite() { format!("{dp:.6}") } else { "none, no knots".into() }
        )));
    }
    if !(params.a > T::zero() && params.a_prime > T::zero() && params.a_dprime > T::zero()) {
        return Err(Error::invalid("barrier constants must be positive"));
    }
    let kinds: Vec<Constituent> = if profiles.is_empty() {
        vec![Constituent::Power, Constituent::Decay]
    } else {
        let mut v: Vec<Constituent> = (0..profiles.len()).map(Constituent::Cone).collect();
        v.push(Constituent::SlowPower);
        v.push(Constituent::Decay);
        v
    };
    let constituents: Vec<(Constituent, Vec<T>)> = kinds
        .iter()
        .map(|&c| Ok((c, constituent_values(grid, c, &params, profiles)?)))
        .collect::<Result<_>>()?;
    let n = grid.len();
    let mut v_plus = vec![T::infinity(); n];
    let mut active = vec![kinds[0]; n];
    for (c, vals) in &constituents {
        for i in 0..n {
            if vals[i] < v_plus[i] {
                v_plus[i] = vals[i];
                active[i] = *c;
            }
        }
    }
    let v_minus = v_plus.iter().map(|&v| -v).collect();
    Ok(BarrierPair { v_minus, v_plus, params, active, constituents })
}

#[derive(Clone, Debug)]
pub struct Violation<T> {
    pub node: usize,
    pub z: Complex<T>,
    pub y: T,
    pub constituent: Option<Constituent>,
    /// Offending value of `N̂` (or of the boundary gap).
    pub value: T,
    pub upper: bool,
}

#[derive(Clone, Debug)]
pub struct BarrierReport<T> {
    /// Minimum of `N̂(v⁺)` over free nodes, scaled by the local size of the
    /// terms.
    pub min_plus: T,
    /// Maximum of `N̂(v⁻)`, scaled likewise.
    pub max_minus: T,
    pub violations: Vec<Violation<T>>,
    pub boundary_bracketed: bool,
}

impl<T: Real> BarrierReport<T> {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative slack in the sign test.
pub const SIGN_SLACK: f64 = 1e-9;

/// Checks `N̂(v⁺) ≥ 0 ≥ N̂(v⁻)` constituent-wise and `v⁻ ≤ data ≤ v⁺` on
/// Dirichlet nodes. Violations are collected, not returned as errors.
pub fn verify_barrier<T: Real>(problem: &SemilinearProblem<T>, pair: &BarrierPair<T>) -> BarrierReport<T> {
    let grid = &problem.grid;
    let n = problem.len();
    let mut violations = Vec::new();
    let mut min_plus = T::infinity();
    let mut max_minus = -T::infinity();
    let mut boundary_bracketed = true;
    let negated: Vec<(Constituent, Vec<T>)> =
        pair.constituents.iter().map(|(c, v)| (*c, v.iter().map(|&x| -x).collect())).collect();
    let slack = T::lit(SIGN_SLACK);
    let tiny = T::lit(1e-12);
    for i in 0..n {
        if problem.fixed[i] {
            let d = problem.boundary[i];
            let up = pair.v_plus[i] - d;
            let lo = d - pair.v_minus[i];
            for (gap, upper) in [(up, true), (lo, false)] {
                if gap < -tiny * (T::one() + d.abs()) {
                    boundary_bracketed = false;
                    violations.push(Violation { node: i, z: grid.z(i), y: grid.y(i), constituent: None, value: gap, upper });
                }
            }
            continue;
        }
        let k = pair.constituents.iter().position(|(c, _)| *c == pair.active[i]).unwrap_or(0);
        for (upper, set) in [(true, &pair.constituents), (false, &negated)] {
            let phi = &set[k].1;
            let l = problem.lap.apply_at(phi, i);
            let nl = problem.nonlinear_at(i, phi[i]);
            let value = l + nl;
            let scale = problem.lap.diag[i] * phi[i].abs() * T::lit(2.0)
                + (nl - problem.f[i]).abs()
                + problem.f[i].abs()
                + T::min_positive_value();
            let scaled = value / scale;
            if upper {
                min_plus = min_plus.min(scaled);
                if value < -slack * scale {
                    violations.push(Violation { node: i, z: grid.z(i), y: grid.y(i), constituent: Some(set[k].0), value, upper });
                }
            } else {
                max_minus = max_minus.max(scaled);
                if value > slack * scale {
                    violations.push(Violation { node: i, z: grid.z(i), y: grid.y(i), constituent: Some(set[k].0), value, upper });
                }
            }
        }
    }
    BarrierReport { min_plus, max_minus, violations, boundary_bracketed }
}

pub const SEARCH_START_EXPONENT: i32 = -4;
pub const SEARCH_MAX_EXPONENT: i32 = 40;

/// Largest power-of-two ratio tried for `A′ / A` (in either direction).
pub const SEARCH_MAX_RATIO_EXPONENT: i32 = 24;
/// Ratio range for `A″ / A′`.
pub const SEARCH_MAX_CONE_EXPONENT: i32 = 8;

/// Smallest `A = 2^k`, `k ≥ -4`, for which the barriers verify, with
/// `A′ = 2^j A` and (with knots) `A″ = 2^l A′`, `|j| ≤ 24`, `0 ≤ l ≤ 8`, taking the
/// smallest ratios that work.
pub fn search_barriers<T: Real>(
    problem: &SemilinearProblem<T>,
    eps: T,
    profiles: &[KnotProfile<T>],
) -> Result<(BarrierPair<T>, BarrierReport<T>)> {
    let third = if profiles.is_empty() { 0 } else { SEARCH_MAX_CONE_EXPONENT };
    let mut fewest = usize::MAX;
    for k in SEARCH_START_EXPONENT..=SEARCH_MAX_EXPONENT {
        let a = T::lit(2f64.powi(k));
        let ratios = (0..=SEARCH_MAX_RATIO_EXPONENT).flat_map(|j| if j == 0 { vec![0] } else { vec![j, -j] });
        for j in ratios {
            let a_prime = a * T::lit(2f64.powi(j));
            for l in 0..=third {
                let params = BarrierParams { a, a_prime, a_dprime: a_prime * T::lit(2f64.powi(l)), eps };
                let pair = build_barriers(&problem.grid, params, profiles)?;
                let report = verify_barrier(problem, &pair);
                if report.is_valid() {
                    return Ok((pair, report));
                }
                fewest = fewest.min(report.violations.len());
            }
        }
    }
    Err(Error::InvariantViolation(format!(
        "no valid barrier pair up to A = 2^{SEARCH_MAX_EXPONENT} (at best {fewest} violating nodes)"
    )))
}

//! Spliced approximate solutions `û` and the analytic source `f = N(û)`.
//!
//! Near `y = 0` away from knots `û = -log y - log|α| + P` with `P` the
//! truncated formal expansion. Inside the ball around a knot of order `n`
//! it equals `U_n(z - p_j) - log|q_j(z)|`, where `p = (z - p_j)^n q_j`, and a
//! quintic bump blends the two across the annulus `[0.5, 0.9]` of the ball.
//! On half-cylinders a second blend in `y` hands over to the limiting
//! surface solution `u_∞`.

use std::sync::Arc;

use num_complex::Complex;

use crate::domain::{GradedGrid, NodeClass, ScalarField};
use crate::error::{Error, Result};
use crate::higgs::{AlphaSource, HiggsData, Polynomial};
use crate::model::closed_form::{knot_correction, un_source, un_value};
use crate::model::expansion::{formal_expansion, ExpansionTable};
use crate::scalar::Real;
use crate::solver::operator::horizontal_laplacian;

/// Blend annulus of the knot balls, as fractions of the radius.
pub const KNOT_BLEND: (f64, f64) = (0.5, 0.9);
pub const DEFAULT_KNOT_RADIUS: f64 = 1.0;

/// Quintic step `s(t)` (1 at `t <= 0`, 0 at `t >= 1`, C²) with `s'` and `s''`.
pub fn quintic_step<T: Real>(t: T) -> (T, T, T) {
    if t <= T::zero() {
        return (T::one(), T::zero(), T::zero());
    }
    if t >= T::one() {
        return (T::zero(), T::zero(), T::zero());
    }
    let t2 = t * t;
    let one = T::one();
    let s = one - t2 * t * (T::lit(10.0) - T::lit(15.0) * t + T::lit(6.0) * t2);
    let ds = -T::lit(30.0) * t2 * (one - t) * (one - t);
    let dds = -T::lit(60.0) * t * (one - t) * (one - T::lit(2.0) * t);
    (s, ds, dds)
}

#[derive(Clone, Debug)]
pub enum FarField<T> {
    /// No hand-over: `û` keeps its near-boundary form up to the top face,
    /// where the remainder is set to zero.
    NahmModel,
    /// Limiting surface solution per horizontal node.
    Limit(Vec<T>),
    /// Plane far field `U_{N₀}(z - centroid) - log|lead|` on top and
    /// lateral faces.
    KnotModel,
}

#[derive(Clone, Debug)]
pub struct ApproxOptions<T> {
    pub expansion_order: usize,
    pub a20: T,
    pub knot_radius: Option<T>,
    /// `y` interval over which `û` hands over to `u_∞`. `None` keeps the
    /// Nahm pole form up to the top face, which then carries `u_∞ - û`.
    pub far_blend: Option<(T, T)>,
}

impl<T: Real> Default for ApproxOptions<T> {
    fn default() -> Self {
        Self { expansion_order: 0, a20: T::zero(), knot_radius: None, far_blend: None }
    }
}

struct KnotBall<T> {
    center: Complex<T>,
    order: usize,
    cofactor: Polynomial<T>,
}

/// Nodal `û` with the coefficients of the remainder problem.
#[derive(Clone, Debug)]
pub struct ApproximateSolution<T> {
    /// `û`; `+∞` on the `y = 0` face.
    pub uhat: Vec<T>,
    pub f: Vec<T>,
    pub c_plus: Vec<T>,
    pub c_minus: Vec<T>,
    /// Dirichlet value of `v` on top and lateral nodes (0 elsewhere).
    pub far: Vec<T>,
    pub knot_radius: T,
    pub expansion: Option<ExpansionTable<T>>,
}

impl<T: Real> ApproximateSolution<T> {
    pub fn boundary_value(&self, i: usize) -> T {
        self.far[i]
    }
}

/// Default knot-ball radius: `min(1, 0.45 × closest knot separation)`, or
/// unbounded when `p = c (z - a)^n` and `U_n - log|c|` is exact.
pub fn default_knot_radius<T: Real>(data: &HiggsData<T>) -> T {
    if let (AlphaSource::Poly(p), [k]) = (&data.alpha, data.knots.as_slice()) {
        if p.degree() == k.order {
            return T::infinity();
        }
    }
    let mut rho = T::lit(DEFAULT_KNOT_RADIUS);
    for (i, a) in data.knots.iter().enumerate() {
        for b in &data.knots[i + 1..] {
            rho = rho.min(T::lit(0.45) * (a.position - b.position).norm());
        }
    }
    rho
}

/// Far-field model `U_{N₀}(z - c) - log|lead|` of polynomial data.
pub fn plane_far_field<T: Real>(p: &Polynomial<T>, z: Complex<T>, y: T) -> T {
    let n = p.degree();
    let lead = p.leading();
    let centroid = if n == 0 { Complex::new(T::zero(), T::zero()) } else { -p.coeffs[n - 1] / (lead * T::of(n)) };
    un_value(n, (z - centroid).norm(), y) - lead.norm().ln()
}

/// Builds `û`, `f = N(û)`, `c₊ = |α|² e^{2û}`, `c₋ = |β|² e^{-2û}` on a grid.
pub fn build_approximate<T: Real>(
    grid: &GradedGrid<T>,
    data: &HiggsData<T>,
    opts: &ApproxOptions<T>,
    far: &FarField<T>,
) -> Result<ApproximateSolution<T>> {
    data.validate_for(grid)?;
    match &data.alpha {
        AlphaSource::Poly(p) => build_plane(grid, data, p, opts, far),
        AlphaSource::Field(_) => build_cylinder(grid, data, opts, far),
    }
}

fn build_plane<T: Real>(
    grid: &GradedGrid<T>,
    data: &HiggsData<T>,
    p: &Polynomial<T>,
    opts: &ApproxOptions<T>,
    far: &FarField<T>,
) -> Result<ApproximateSolution<T>> {
    if opts.expansion_order > 0 {
        return Err(Error::UnsupportedData("expansion terms are not used with polynomial data".into()));
    }
    let rho = opts.knot_radius.unwrap_or_else(|| default_knot_radius(data));
    if !(rho > T::zero()) {
        return Err(Error::invalid("knot radius must be positive"));
    }
    for (i, a) in data.knots.iter().enumerate() {
        for b in &data.knots[i + 1..] {
            if (a.position - b.position).norm() <= T::lit(2.0 * KNOT_BLEND.1) * rho {
                return Err(Error::invalid("knot balls overlap"));
            }
        }
    }
    let balls: Vec<KnotBall<T>> = data
        .knots
        .iter()
        .map(|k| KnotBall { center: k.position, order: k.order, cofactor: p.deflate(k.position, k.order).0 })
        .collect();
    let (ra, rb) = (rho * T::lit(KNOT_BLEND.0), rho * T::lit(KNOT_BLEND.1));
    let n = grid.len();
    let mut out = ApproximateSolution {
        uhat: vec![T::zero(); n],
        f: vec![T::zero(); n],
        c_plus: vec![T::zero(); n],
        c_minus: vec![T::zero(); n],
        far: vec![T::zero(); n],
        knot_radius: rho,
        expansion: None,
    };
    let two = T::lit(2.0);
    for i in 0..n {
        let y = grid.y(i);
        let z = grid.z(i);
        if y == T::zero() {
            out.uhat[i] = T::infinity();
            continue;
        }
        let ball = balls.iter().find(|b| (z - b.center).norm() < rb);
        match ball {
            Some(b) if (z - b.center).norm() <= ra => {
                let r = (z - b.center).norm();
                out.uhat[i] = un_value(b.order, r, y) - b.cofactor.eval(z).norm().ln();
                out.c_plus[i] = un_source(b.order, r, y);
            }
            Some(b) => {
                let r = (z - b.center).norm();
                let (chi, dchi, ddchi) = quintic_step((r - ra) / (rb - ra));
                let (dchi, ddchi) = (dchi / (rb - ra), ddchi / ((rb - ra) * (rb - ra)));
                let (d, d_r, _) = knot_correction(b.order, r, y);
                let e = chi * d;
                out.uhat[i] = -y.ln() - p.eval(z).norm().ln() + e;
                out.c_plus[i] = (two * e).exp() / (y * y);
                let lap_chi = ddchi + dchi / r;
                out.f[i] = ((two * e).exp_m1() - chi * (two * d).exp_m1()) / (y * y) - two * dchi * d_r - d * lap_chi;
            }
            None => {
                out.uhat[i] = -y.ln() - p.eval(z).norm().ln();
                out.c_plus[i] = (y * y).recip();
            }
        }
    }
    if let FarField::KnotModel = far {
        for i in 0..n {
            if matches!(grid.classify(i), NodeClass::Top | NodeClass::Lateral) {
                out.far[i] = plane_far_field(p, grid.z(i), grid.y(i)) - out.uhat[i];
            }
        }
    } else {
        return Err(Error::invalid("plane problems take the knot far field"));
    }
    Ok(out)
}

fn build_cylinder<T: Real>(
    grid: &GradedGrid<T>,
    data: &HiggsData<T>,
    opts: &ApproxOptions<T>,
    far: &FarField<T>,
) -> Result<ApproximateSolution<T>> {
    let table = formal_expansion(data, grid, opts.expansion_order, opts.a20)?;
    let nh = grid.horizontal_len();
    let y_max = grid.y_nodes().last().copied().unwrap_or(T::one());
    let (ylo, yhi, u_inf, lap_inf) = match far {
        FarField::Limit(u) => {
            if u.len() != nh {
                return Err(Error::invalid("u_∞ does not match the horizontal grid"));
            }
            let (a, b) = opts.far_blend.unwrap_or((y_max * T::lit(2.0), y_max * T::lit(3.0)));
            if opts.far_blend.is_some() && !(a > T::zero() && b > a && b < y_max) {
                return Err(Error::invalid("far blend interval must lie inside (0, y_max)"));
            }
            (a, b, u.clone(), horizontal_laplacian(grid, &data.g0_sq, u))
        }
        FarField::NahmModel => (y_max * T::lit(2.0), y_max * T::lit(3.0), vec![T::zero(); nh], vec![T::zero(); nh]),
        FarField::KnotModel => return Err(Error::invalid("cylinder problems take a limit or Nahm far field")),
    };
    let lap_la = horizontal_laplacian(grid, &data.g0_sq, &table.log_alpha);
    let n = grid.len();
    let mut out = ApproximateSolution {
        uhat: vec![T::zero(); n],
        f: vec![T::zero(); n],
        c_plus: vec![T::zero(); n],
        c_minus: vec![T::zero(); n],
        far: vec![T::zero(); n],
        knot_radius: T::zero(),
        expansion: None,
    };
    let two = T::lit(2.0);
    for i in 0..n {
        let y = grid.y(i);
        let h = grid.horizontal_index(i);
        if y == T::zero() {
            out.uhat[i] = T::infinity();
            continue;
        }
        let la = table.log_alpha[h];
        let alpha_sq = (two * la).exp();
        let beta_sq = data.beta_sq.at(h);
        let k = data.curvature.at(h);
        let (p, py, pyy, lap_p) = table.evaluate(h, y);
        if y <= ylo {
            out.uhat[i] = -y.ln() - la + p;
            out.c_plus[i] = (two * p).exp() / (y * y);
            out.c_minus[i] = beta_sq * alpha_sq * y * y * (-two * p).exp();
            out.f[i] = table.k_eff[h] - lap_p + (two * p).exp_m1() / (y * y) - pyy - out.c_minus[i];
        } else {
            let (tau, dt, ddt) = quintic_step((y - ylo) / (yhi - ylo));
            let (dt, ddt) = (dt / (yhi - ylo), ddt / ((yhi - ylo) * (yhi - ylo)));
            let a = -y.ln() - la + p;
            let a_y = -y.recip() + py;
            let a_yy = (y * y).recip() + pyy;
            let ui = u_inf[h];
            let u = tau * a + (T::one() - tau) * ui;
            let lap_a = -lap_la[h] + lap_p;
            let lap_u = tau * lap_a + (T::one() - tau) * lap_inf[h];
            let u_yy = ddt * (a - ui) + two * dt * a_y + tau * a_yy;
            out.uhat[i] = u;
            out.c_plus[i] = alpha_sq * (two * u).exp();
            out.c_minus[i] = beta_sq * (-two * u).exp();
            out.f[i] = k - lap_u - u_yy + out.c_plus[i] - out.c_minus[i];
        }
    }
    if let FarField::Limit(u) = far {
        for i in 0..n {
            if grid.classify(i) == NodeClass::Top {
                out.far[i] = u[grid.horizontal_index(i)] - out.uhat[i];
            }
        }
    }
    out.expansion = Some(table);
    Ok(out)
}

/// `û` for a grid that excludes `y = 0` (default options; half-cylinder
/// data hands over to nothing, plane data uses the knot far field).
pub fn build_approximate_solution<T: Real>(grid: Arc<GradedGrid<T>>, data: &HiggsData<T>) -> Result<ScalarField<T>> {
    if grid.includes_y0() {
        return Err(Error::invalid("û is singular on y = 0; use a grid that excludes it"));
    }
    let far = match data.alpha {
        AlphaSource::Poly(_) => FarField::KnotModel,
        AlphaSource::Field(_) => FarField::NahmModel,
    };
    let approx = build_approximate(&grid, data, &ApproxOptions::default(), &far)?;
    ScalarField::new(grid, approx.uhat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec, Grading, KnotPoint};

    #[test]
    fn step_is_c2() {
        let h = 1e-5;
        for t in [0.1f64, 0.35, 0.8] {
            let (s, ds, dds) = quintic_step(t);
            let (sp, _, _) = quintic_step(t + h);
            let (sm, _, _) = quintic_step(t - h);
            assert!(((sp - sm) / (2.0 * h) - ds).abs() < 1e-8);
            assert!(((sp - 2.0 * s + sm) / (h * h) - dds).abs() < 1e-4);
        }
        assert_eq!(quintic_step(0.0f64).0, 1.0);
        assert_eq!(quintic_step(1.0f64).0, 0.0);
    }

    #[test]
    fn no_knot_unit_alpha_is_nahm_model() {
        let spec = DomainSpec::torus_half_cylinder(1.0f64, 1.0, 2.0);
        let g = Arc::new(build_grid(&spec, &[8, 8, 8], Grading::default().excluding_y0()).unwrap());
        let u = build_approximate_solution(g.clone(), &HiggsData::constant(-1.0, 1.0, 0.0)).unwrap();
        for i in 0..g.len() {
            assert!((u.values()[i] + g.y(i).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn single_knot_is_model_inside_ball() {
        let knots = vec![KnotPoint::at(0.0, 0.0, 1).unwrap()];
        let data = HiggsData::plane(Polynomial::real(&[0.0, 1.0]).unwrap(), knots.clone()).unwrap();
        let spec = DomainSpec::plane_half_space(2.0f64, 2.0, knots);
        let g = Arc::new(build_grid(&spec, &[17, 17, 9], Grading::default().excluding_y0()).unwrap());
        let u = build_approximate_solution(g.clone(), &data).unwrap();
        for i in 0..g.len() {
            let (z, y) = (g.z(i), g.y(i));
            let r = z.norm();
            let model = un_value(1, r, y);
            let plain = -y.ln() - r.ln();
            if r <= 0.5 {
                assert!((u.values()[i] - model).abs() < 1e-13);
            } else {
                let (lo, hi) = (model.min(plain), model.max(plain));
                assert!(u.values()[i] >= lo - 1e-13 && u.values()[i] <= hi + 1e-13);
            }
        }
    }

    #[test]
    fn overlapping_balls_rejected() {
        let knots = vec![KnotPoint::at(0.0, 0.0, 1).unwrap(), KnotPoint::at(0.5, 0.0, 1).unwrap()];
        let p = Polynomial::from_roots(Complex::new(1.0, 0.0), &[Complex::new(0.0, 0.0), Complex::new(0.5, 0.0)]).unwrap();
        let data = HiggsData::plane(p, knots.clone()).unwrap();
        let spec = DomainSpec::plane_half_space(2.0f64, 2.0, knots);
        let g = build_grid(&spec, &[9, 9, 9], Grading::default()).unwrap();
        let opts = ApproxOptions { knot_radius: Some(0.5), ..ApproxOptions::default() };
        assert!(build_approximate(&g, &data, &opts, &FarField::KnotModel).is_err());
        assert!(build_approximate(&g, &data, &ApproxOptions::default(), &FarField::KnotModel).is_ok());
    }

    #[test]
    fn source_matches_direct_evaluation_in_blend() {
        // f = -(Δ + ∂_y²) û + |p|² e^{2û} by fourth-order differences
        let knots = vec![KnotPoint::at(0.0, 0.0, 2).unwrap()];
        let p = Polynomial::real(&[0.0, 0.0, 1.0]).unwrap();
        let data = HiggsData::plane(p.clone(), knots.clone()).unwrap();
        let rho = 1.0;
        let uhat = |x: f64, yy: f64, y: f64| {
            let z = Complex::new(x, yy);
            let r = z.norm();
            let (chi, _, _) = quintic_step((r - 0.5 * rho) / (0.4 * rho));
            let plain = -y.ln() - p.eval(z).norm().ln();
            chi * (un_value(2, r, y) - 0.0) + (1.0 - chi) * plain
        };
        let spec = DomainSpec::plane_half_space(2.0f64, 2.0, knots);
        let g = build_grid(&spec, &[9, 9, 9], Grading::default()).unwrap();
        let a = build_approximate(&g, &data, &ApproxOptions::default(), &FarField::KnotModel).unwrap();
        let _ = a;
        let (x, yy, y) = (0.55f64, 0.3f64, 0.2f64);
        let h = 1e-3;
        let d2 = |f: &dyn Fn(f64) -> f64, c: f64| {
            (-f(c - 2.0 * h) + 16.0 * f(c - h) - 30.0 * f(c) + 16.0 * f(c + h) - f(c + 2.0 * h)) / (12.0 * h * h)
        };
        let lap = d2(&|t| uhat(t, yy, y), x) + d2(&|t| uhat(x, t, y), yy) + d2(&|t| uhat(x, yy, t), y);
        let z = Complex::new(x, yy);
        let direct = -lap + p.eval(z).norm_sqr() * (2.0 * uhat(x, yy, y)).exp();
        // analytic source at the same point
        let r = z.norm();
        let (chi, dchi, ddchi) = quintic_step((r - 0.5) / 0.4);
        let (dchi, ddchi) = (dchi / 0.4, ddchi / 0.16);
        let (d, d_r, _) = knot_correction(2, r, y);
        let e = chi * d;
        let f = ((2.0 * e).exp_m1() - chi * (2.0 * d).exp_m1()) / (y * y) - 2.0 * dchi * d_r - d * (ddchi + dchi / r);
        assert!((f - direct).abs() < 1e-6, "{f} vs {direct}");
    }
}

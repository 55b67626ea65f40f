//! Formal boundary expansion `u = -log y - log|α| + Σ a_{jℓ} y^j (log y)^ℓ`.
//!
//! Substituting into the scalar equation gives, at each power `y^{j-2}`,
//! the triangular system
//!
//! ```text
//! (2 - j(j-1)) a_{jm} - (m+1)(2j-1) a_{j,m+1} - (m+2)(m+1) a_{j,m+2} = -R_{jm}
//! ```
//!
//! from `(-∂_y² + 2/y²) y^j L^ℓ`, where `R_j` collects the already known
//! terms. At `j = 2` the diagonal vanishes, the log degree rises by one and
//! `a_{20}` stays free.

use crate::domain::GradedGrid;
use crate::error::{Error, Result};
use crate::higgs::{AlphaSource, HiggsData};
use crate::scalar::Real;
use crate::solver::operator::horizontal_laplacian;

pub const MAX_EXPANSION_ORDER: usize = 6;

/// Coefficient fields `a_{jℓ}` on the horizontal nodes.
#[derive(Clone, Debug)]
pub struct ExpansionTable<T> {
    pub order: usize,
    /// `coeffs[j][l][h]`.
    pub coeffs: Vec<Vec<Vec<T>>>,
    /// `Δ_{g0} a_{jℓ}`, same layout.
    pub laplacians: Vec<Vec<Vec<T>>>,
    /// `K + Δ_{g0} log|α|` per horizontal node.
    pub k_eff: Vec<T>,
    pub log_alpha: Vec<T>,
}

impl<T: Real> ExpansionTable<T> {
    pub fn max_log_power(&self) -> usize {
        self.order + 1
    }

    pub fn a(&self, j: usize, l: usize, h: usize) -> T {
        if j > self.order || l > self.max_log_power() {
            return T::zero();
        }
        self.coeffs[j][l][h]
    }

    /// `(P, P_y, P_yy, Δ_{g0} P)` of the truncated series at `(h, y)`.
    pub fn evaluate(&self, h: usize, y: T) -> (T, T, T, T) {
        let lg = y.ln();
        let mut p = T::zero();
        let mut py = T::zero();
        let mut pyy = T::zero();
        let mut lap = T::zero();
        for j in 2..=self.order {
            let yj = y.powi(j as i32);
            let jf = T::of(j);
            for l in 0..=self.max_log_power() {
                let a = self.coeffs[j][l][h];
                let da = self.laplacians[j][l][h];
                if a == T::zero() && da == T::zero() {
                    continue;
                }
                let lf = T::of(l);
                let lp = |k: i64| if k < 0 { T::zero() } else { lg.powi(k as i32) };
                let ll = l as i64;
                p = p + a * yj * lp(ll);
                lap = lap + da * yj * lp(ll);
                py = py + a * yj / y * (jf * lp(ll) + lf * lp(ll - 1));
                pyy = pyy
                    + a * yj / (y * y)
                        * (jf * (jf - T::one()) * lp(ll)
                            + lf * (T::lit(2.0) * jf - T::one()) * lp(ll - 1)
                            + lf * (lf - T::one()) * lp(ll - 2));
            }
        }
        (p, py, pyy, lap)
    }
}

/// Dense truncated series `Σ c[j][l] y^j L^l`.
#[derive(Clone)]
struct Series<T> {
    c: Vec<Vec<T>>,
}

impl<T: Real> Series<T> {
    fn zero(jmax: usize, lmax: usize) -> Self {
        Self { c: vec![vec![T::zero(); lmax + 1]; jmax + 1] }
    }

    fn mul(&self, other: &Self) -> Self {
        let jmax = self.c.len() - 1;
        let lmax = self.c[0].len() - 1;
        let mut out = Self::zero(jmax, lmax);
        for j1 in 0..=jmax {
            for l1 in 0..=lmax {
                let a = self.c[j1][l1];
                if a == T::zero() {
                    continue;
                }
                for j2 in 0..=(jmax - j1) {
                    for l2 in 0..=(lmax - l1) {
                        out.c[j1 + j2][l1 + l2] = out.c[j1 + j2][l1 + l2] + a * other.c[j2][l2];
                    }
                }
            }
        }
        out
    }

    /// `exp(s) - 1 - s` for a series without constant term.
    fn exp_minus_linear(&self) -> Self {
        let jmax = self.c.len() - 1;
        let lmax = self.c[0].len() - 1;
        let mut out = Self::zero(jmax, lmax);
        let mut power = self.mul(self);
        let mut fact = T::lit(2.0);
        let mut k = 2;
        while k <= jmax {
            for j in 0..=jmax {
                for l in 0..=lmax {
                    out.c[j][l] = out.c[j][l] + power.c[j][l] / fact;
                }
            }
            k += 1;
            fact = fact * T::of(k);
            power = power.mul(self);
        }
        out
    }
}

/// Formal expansion coefficients up to `y^order` with `a_{20}` prescribed.
pub fn formal_expansion<T: Real>(data: &HiggsData<T>, grid: &GradedGrid<T>, order: usize, a20: T) -> Result<ExpansionTable<T>> {
    if order > MAX_EXPANSION_ORDER {
        return Err(Error::invalid(format!("expansion order must be at most {MAX_EXPANSION_ORDER}")));
    }
    let nh = grid.horizontal_len();
    let alpha_sq: Vec<T> = (0..nh).map(|h| data.alpha_sq(h, grid.z_of_horizontal(h))).collect();
    if alpha_sq.iter().any(|&a| !(a > T::zero())) {
        return Err(Error::UnsupportedData("expansion needs |α|² > 0 on the grid".into()));
    }
    if order > 0 && matches!(data.alpha, AlphaSource::Poly(_)) && !data.knots.is_empty() {
        return Err(Error::UnsupportedData("expansion is not available with knots".into()));
    }
    let log_alpha: Vec<T> = alpha_sq.iter().map(|&a| T::lit(0.5) * a.ln()).collect();
    let lap_la = horizontal_laplacian(grid, &data.g0_sq, &log_alpha);
    let k_eff: Vec<T> = (0..nh).map(|h| data.curvature.at(h) + lap_la[h]).collect();
    let ab: Vec<T> = (0..nh).map(|h| alpha_sq[h] * data.beta_sq.at(h)).collect();

    let lmax = order + 1;
    let mut coeffs = vec![vec![vec![T::zero(); nh]; lmax + 1]; order + 1];
    let mut laplacians = coeffs.clone();
    let two = T::lit(2.0);
    for j in 2..=order {
        let jf = T::of(j);
        for h in 0..nh {
            // series 2P with coefficients known so far
            let mut p2 = Series::zero(order, lmax);
            for jj in 2..j {
                for l in 0..=lmax {
                    p2.c[jj][l] = two * coeffs[jj][l][h];
                }
            }
            let q = p2.exp_minus_linear();
            let mut neg = p2.clone();
            for row in &mut neg.c {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            let eneg = neg.exp_minus_linear();
            let mut r = vec![T::zero(); lmax + 1];
            for m in 0..=lmax {
                // (e^{2P} - 1 - 2P)/y² at y^{j-2}
                r[m] = q.c[j][m];
                // -Δ a_{j-2}
                r[m] = r[m] - laplacians[j - 2][m][h];
                // -|α|²|β|² y² e^{-2P} at y^{j-2}
                let e = if j == 4 && m == 0 { T::one() } else { T::zero() }
                    + if j >= 4 { neg.c[j - 4][m] + eneg.c[j - 4][m] } else { T::zero() };
                r[m] = r[m] - ab[h] * e;
            }
            if j == 2 {
                r[0] = r[0] + k_eff[h];
                if r[lmax] != T::zero() {
                    return Err(Error::InvariantViolation("log degree overflow in expansion".into()));
                }
                coeffs[2][0][h] = a20;
                for m in (0..lmax).rev() {
                    let next = if m + 2 <= lmax { coeffs[2][m + 2][h] } else { T::zero() };
                    coeffs[2][m + 1][h] = (r[m] - T::of((m + 2) * (m + 1)) * next) / T::of(3 * (m + 1));
                }
            } else {
                let diag = two - jf * (jf - T::one());
                for m in (0..=lmax).rev() {
                    let a1 = if m < lmax { coeffs[j][m + 1][h] } else { T::zero() };
                    let a2 = if m + 2 <= lmax { coeffs[j][m + 2][h] } else { T::zero() };
                    coeffs[j][m][h] = (-r[m]
                        + T::of(m + 1) * (two * jf - T::one()) * a1
                        + T::of((m + 2) * (m + 1)) * a2)
                        / diag;
                }
            }
        }
        for l in 0..=lmax {
            laplacians[j][l] = horizontal_laplacian(grid, &data.g0_sq, &coeffs[j][l]);
        }
    }
    Ok(ExpansionTable { order, coeffs, laplacians, k_eff, log_alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec, Grading};

    fn line() -> GradedGrid<f64> {
        build_grid(&DomainSpec::ode_line(1.0), &[16], Grading::uniform()).unwrap()
    }

    #[test]
    fn leading_log_coefficient() {
        let g = line();
        for (k, b) in [(-1.0, 0.0), (0.7, 0.0), (-2.0, 0.5)] {
            let t = formal_expansion(&HiggsData::constant(k, 1.0, b), &g, 4, 0.0).unwrap();
            assert!((t.a(2, 1, 0) - k / 3.0).abs() < 1e-15);
            for l in 0..=t.max_log_power() {
                assert_eq!(t.a(0, l, 0), 0.0);
                assert_eq!(t.a(1, l, 0), 0.0);
            }
        }
    }

    #[test]
    fn flat_data_has_vanishing_expansion() {
        let t = formal_expansion(&HiggsData::constant(0.0, 1.0, 0.0), &line(), 6, 0.0).unwrap();
        for j in 0..=6 {
            for l in 0..=t.max_log_power() {
                assert_eq!(t.a(j, l, 0), 0.0);
            }
        }
    }

    #[test]
    fn residual_decays_with_order() {
        // N(û_formal) = K - u'' + e^{2u} - |β|² e^{-2u} for constant data.
        for beta in [0.0, 0.8] {
            let data = HiggsData::constant(-1.0, 1.0, beta);
            let t = formal_expansion(&data, &line(), 6, 0.25).unwrap();
            let resid = |y: f64| {
                let (p, _, pyy, _) = t.evaluate(0, y);
                let u = -y.ln() + p;
                -1.0 - pyy + (2.0 * p).exp_m1() / (y * y) - beta * (-2.0 * u).exp()
            };
            // O(y^5) up to log factors, which are divided out
            let ys = [0.1, 0.05, 0.025];
            let rs: Vec<f64> = ys.iter().map(|&y| resid(y).abs() / y.ln().powi(2)).collect();
            let slope = (rs[0] / rs[2]).ln() / (ys[0] / ys[2]).ln();
            assert!(slope > 4.5, "beta={beta}: slope {slope}, residuals {rs:?}");
        }
    }
}

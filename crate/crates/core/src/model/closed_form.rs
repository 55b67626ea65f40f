//! Closed-form model solutions: the knot model `U_n`, the angular sums
//! `S_n`, the model Higgs field magnitudes and the `sinh` family.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `S_n(ψ) = Σ_{k=0}^{n} (1 + sin ψ)^{n-k} (1 - sin ψ)^k`.
///
/// Evaluated through the even expansion `Σ_{j odd} C(n+1, j) s^{j-1}`,
/// which has only positive terms.
pub fn eval_sn<T: Real>(n: usize, psi: T) -> T {
    sn_of_sin(n, psi.sin())
}

/// `S_n` as a function of `s = sin ψ`.
pub fn sn_of_sin<T: Real>(n: usize, s: T) -> T {
    T::of(n + 1) * (T::one() + sn_excess(n, s))
}

/// `S_n / (n + 1) - 1`, accurate for small `s`.
pub fn sn_excess<T: Real>(n: usize, s: T) -> T {
    let s2 = s * s;
    let mut acc = T::zero();
    let mut pow = s2;
    let mut j = 3;
    while j <= n + 1 {
        acc = acc + T::lit(binomial(n + 1, j) / (n + 1) as f64) * pow;
        pow = pow * s2;
        j += 2;
    }
    acc
}

/// Direct summation of `S_n(ψ)`.
pub fn eval_sn_direct<T: Real>(n: usize, psi: T) -> T {
    let s = psi.sin();
    let (a, b) = (T::one() + s, T::one() - s);
    (0..=n).map(|k| a.powi((n - k) as i32) * b.powi(k as i32)).sum()
}

/// Value of `U_n` together with the disagreement between its two forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelValue<T> {
    pub value: T,
    /// Relative difference between the direct closed form and the
    /// decomposition `-log y - n log R + log((n+1)/S_n)`.
    pub consistency: T,
}

/// `U_n(r, y)`, the homogeneous axisymmetric knot model of order `n`.
pub fn eval_un<T: Real>(n: usize, r: T, y: T) -> Result<ModelValue<T>> {
    if r == T::zero() && y == T::zero() {
        return Err(Error::CoordinateSingularity("U_n is singular at r = y = 0".into()));
    }
    if !(y > T::zero()) || r < T::zero() {
        return Err(Error::invalid("U_n needs r >= 0 and y > 0"));
    }
    let value = un_value(n, r, y);
    let direct = un_direct(n, r, y);
    let consistency = if direct.is_finite() {
        (direct - value).abs() / value.abs().max(T::one())
    } else {
        T::nan()
    };
    Ok(ModelValue { value, consistency })
}

/// Decomposition form of `U_n`; no argument checks.
pub fn un_value<T: Real>(n: usize, r: T, y: T) -> T {
    let big_r = r.hypot(y);
    let s = y / big_r;
    -y.ln() - T::of(n) * big_r.ln() - sn_excess(n, s).ln_1p()
}

/// `log(2(n+1) / ((R + y)^{n+1} - (R - y)^{n+1}))`.
pub fn un_direct<T: Real>(n: usize, r: T, y: T) -> T {
    let big_r = r.hypot(y);
    let e = (n + 1) as i32;
    (T::of(2 * (n + 1)) / ((big_r + y).powi(e) - (big_r - y).powi(e))).ln()
}

/// `(∂_r U_n, ∂_y U_n)` in cancellation-free form.
pub fn un_gradient<T: Real>(n: usize, r: T, y: T) -> (T, T) {
    let big_r = r.hypot(y);
    let s = y / big_r;
    let c = r / big_r;
    let np1 = T::of(n + 1);
    let sn = sn_of_sin(n, s);
    let u_r = if n == 0 { T::zero() } else { -np1 * c / big_r * sn_of_sin(n - 1, s) / sn };
    let u_y = -np1 * even_sum(n, s) / (y * sn);
    (u_r, u_y)
}

/// `((1+s)^{n+1} + (1-s)^{n+1}) / 2 = Σ_{j even} C(n+1, j) s^j`.
fn even_sum<T: Real>(n: usize, s: T) -> T {
    let s2 = s * s;
    let mut acc = T::zero();
    let mut pow = T::one();
    let mut j = 0;
    while j <= n + 1 {
        acc = acc + T::lit(binomial(n + 1, j)) * pow;
        pow = pow * s2;
        j += 2;
    }
    acc
}

/// `r^{2n} e^{2 U_n}`, the right-hand side of the model equation.
pub fn un_source<T: Real>(n: usize, r: T, y: T) -> T {
    let big_r = r.hypot(y);
    let s = y / big_r;
    let c = r / big_r;
    let amp = T::of(n + 1) * c.powi(n as i32) / (y * sn_of_sin(n, s));
    amp * amp
}

/// Correction `D = U_n + log y + n log r` with its gradient, for `r > 0`.
///
/// Inside a knot ball `u = -log y - log|p| + D` reproduces `U_n` up to a
/// harmonic term; all three quantities are `O(y²/r²)` and computed
/// without cancellation.
pub fn knot_correction<T: Real>(n: usize, r: T, y: T) -> (T, T, T) {
    if n == 0 {
        return (T::zero(), T::zero(), T::zero());
    }
    let t2 = (y / r) * (y / r);
    let big_r = r.hypot(y);
    let s = y / big_r;
    let c = r / big_r;
    let s2 = s * s;
    let d = -T::lit(0.5) * T::of(n) * t2.ln_1p() - sn_excess(n, s).ln_1p();
    let sn = sn_of_sin(n, s);
    // D_y = (s/R) Σ_{k>=1} [C(n+1,2k+1) - (n+1) C(n+1,2k)] s^{2k-2} / S_n
    let mut acc_y = T::zero();
    // D_r numerator Σ_{k>=1} [n C(n+1,2k+1) - (n+1) C(n,2k+1) + (n+1) C(n,2k-1)] s^{2k}
    let mut acc_r = T::zero();
    let mut pow = T::one();
    let nf = n as f64;
    for k in 1..=(n / 2 + 1) {
        let cy = binomial(n + 1, 2 * k + 1) - (nf + 1.0) * binomial(n + 1, 2 * k);
        let cr = nf * binomial(n + 1, 2 * k + 1) - (nf + 1.0) * binomial(n, 2 * k + 1)
            + (nf + 1.0) * binomial(n, 2 * k - 1);
        acc_y = acc_y + T::lit(cy) * pow;
        acc_r = acc_r + T::lit(cr) * pow * s2;
        pow = pow * s2;
    }
    let d_y = s / big_r * acc_y / sn;
    let d_r = acc_r / (big_r * c * sn);
    (d, d_r, d_y)
}

/// Model Higgs field data `(|φ_z|, φ₁ diagonal value)` at `(R, ψ)`.
pub fn eval_model_phi<T: Real>(n: usize, big_r: T, psi: T) -> Result<(T, T)> {
    if !(big_r > T::zero()) {
        return Err(Error::CoordinateSingularity("R must be positive".into()));
    }
    if !(psi > T::zero()) || psi > T::FRAC_PI_2() + T::epsilon() {
        return Err(Error::CoordinateSingularity(
            "ψ = 0 is the Nahm pole face where the model fields blow up".into(),
        ));
    }
    let s = psi.sin();
    let c = psi.cos().max(T::zero());
    let np1 = T::of(n + 1);
    let sn = sn_of_sin(n, s);
    let phi_z = np1 * c.powi(n as i32) / (big_r * s * sn);
    let phi1 = np1 / (T::lit(2.0) * big_r) * even_sum(n, s) / (s * sn);
    Ok((phi_z, phi1))
}

/// `log(C / sinh(C y))`, a solution of `-u'' + e^{2u} = 0`.
pub fn eval_sinh_family<T: Real>(c: T, y: T) -> Result<T> {
    if !(c > T::zero()) || !(y > T::zero()) {
        return Err(Error::invalid("sinh family needs C > 0 and y > 0"));
    }
    let x = c * y;
    // log sinh x = x + log((1 - e^{-2x}) / 2)
    let log_sinh = if x > T::one() {
        x + (-(-T::lit(2.0) * x).exp()).ln_1p() - T::LN_2()
    } else {
        (x.sinh() / x).ln() + x.ln()
    };
    Ok(c.ln() - log_sinh)
}

/// Closed-form knot model of order `n`, evaluable in cylindrical or
/// spherical coordinates.
#[derive(Clone, Copy, Debug)]
pub struct ModelSolution {
    pub n: usize,
}

impl ModelSolution {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn at<T: Real>(&self, r: T, y: T) -> Result<T> {
        eval_un(self.n, r, y).map(|m| m.value)
    }

    pub fn at_spherical<T: Real>(&self, big_r: T, psi: T) -> Result<T> {
        if !(big_r > T::zero()) || !(psi > T::zero()) {
            return Err(Error::CoordinateSingularity("U_n needs R > 0 and ψ > 0".into()));
        }
        let y = big_r * psi.sin();
        Ok(-y.ln() - T::of(self.n) * big_r.ln() + (T::of(self.n + 1) / eval_sn(self.n, psi)).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};

    #[test]
    fn sn_examples() {
        for psi in [0.0, 0.3, 1.1, FRAC_PI_2] {
            assert!((eval_sn(0, psi) - 1.0f64).abs() < 1e-15);
            assert!((eval_sn(1, psi) - 2.0f64).abs() < 1e-15);
        }
        assert!((eval_sn(2, FRAC_PI_2) - 4.0f64).abs() < 1e-14);
        assert!((eval_sn(2, 0.0f64) - 3.0).abs() < 1e-15);
        for n in 0..7 {
            for psi in [0.01f64, 0.4, 0.9, 1.4] {
                let (a, b) = (eval_sn(n, psi), eval_sn_direct(n, psi));
                assert!((a - b).abs() <= 1e-13 * b);
            }
        }
    }

    #[test]
    fn un_examples() {
        for r in [0.0, 0.5, 3.0] {
            assert!((eval_un(0, r, 0.7f64).unwrap().value + 0.7f64.ln()).abs() < 1e-15);
        }
        let m = eval_un(1, 1.0f64, 1.0).unwrap();
        assert!((m.value + 0.5 * LN_2).abs() < 1e-15);
        assert!((un_direct(1, 1.0f64, 1.0) - (4.0 / (4.0 * 2f64.sqrt())).ln()).abs() < 1e-15);
        assert!(m.consistency < 1e-14);
        for y in [0.1f64, 1.0, 5.0] {
            assert!((eval_un(1, 0.0, y).unwrap().value + 2.0 * y.ln()).abs() < 1e-14);
        }
        assert!(matches!(eval_un(1, 0.0f64, 0.0), Err(Error::CoordinateSingularity(_))));
    }

    #[test]
    fn gradient_matches_differences() {
        for n in 0..4 {
            for (r, y) in [(0.4f64, 0.3f64), (1.5, 0.05), (0.2, 2.0)] {
                let (ur, uy) = un_gradient(n, r, y);
                let h = 1e-6;
                let fr = (un_value(n, r + h, y) - un_value(n, r - h, y)) / (2.0 * h);
                let fy = (un_value(n, r, y + h) - un_value(n, r, y - h)) / (2.0 * h);
                assert!((ur - fr).abs() < 1e-6 * (1.0 + fr.abs()), "n={n}");
                assert!((uy - fy).abs() < 1e-6 * (1.0 + fy.abs()), "n={n}");
                let (d, dr, dy) = knot_correction(n, r, y);
                assert!((d - (un_value(n, r, y) + y.ln() + n as f64 * r.ln())).abs() < 1e-12);
                assert!((dr - (ur + n as f64 / r)).abs() < 1e-8 * (1.0 + dr.abs()));
                assert!((dy - (uy + 1.0 / y)).abs() < 1e-8 * (1.0 + dy.abs()));
            }
        }
    }

    #[test]
    fn model_equation_holds_pointwise() {
        // (∂_r² + ∂_r/r + ∂_y²) U_n = r^{2n} e^{2U_n}, by fourth-order differences
        for n in 0..4 {
            let (r, y) = (0.7f64, 0.45f64);
            let h = 1e-3;
            let f = |r: f64, y: f64| un_value(n, r, y);
            let d2 = |a: f64, b: f64, c: f64, d: f64, e: f64| (-a + 16.0 * b - 30.0 * c + 16.0 * d - e) / (12.0 * h * h);
            let urr = d2(f(r - 2.0 * h, y), f(r - h, y), f(r, y), f(r + h, y), f(r + 2.0 * h, y));
            let uyy = d2(f(r, y - 2.0 * h), f(r, y - h), f(r, y), f(r, y + h), f(r, y + 2.0 * h));
            let (ur, _) = un_gradient(n, r, y);
            let lhs = urr + ur / r + uyy;
            let rhs = un_source(n, r, y);
            assert!((lhs - rhs).abs() < 1e-7 * rhs, "n={n}: {lhs} vs {rhs}");
            assert!((rhs - r.powi(2 * n as i32) * (2.0 * f(r, y)).exp()).abs() < 1e-12 * rhs);
        }
    }

    #[test]
    fn model_phi_examples() {
        let (pz, p1) = eval_model_phi(0, 2.0f64, 0.5).unwrap();
        let y = 2.0 * 0.5f64.sin();
        assert!((pz - 1.0 / y).abs() < 1e-14);
        assert!((p1 - 0.5 / y).abs() < 1e-14);
        let (pz, p1) = eval_model_phi(1, 3.0f64, FRAC_PI_2).unwrap();
        assert!(pz.abs() < 1e-15);
        assert!((p1 - 1.0 / 3.0).abs() < 1e-15);
        assert!(eval_model_phi(1, 1.0f64, 0.0).is_err());
        // φ₁ diagonal equals -∂_y U_n / 2
        let (r, yy) = (0.8f64, 0.6f64);
        let big_r = r.hypot(yy);
        let (_, p1) = eval_model_phi(2, big_r, (yy / big_r).asin()).unwrap();
        assert!((p1 + 0.5 * un_gradient(2, r, yy).1).abs() < 1e-13);
    }

    #[test]
    fn spherical_and_cylindrical_forms_agree() {
        let m = ModelSolution::new(3);
        let (r, y) = (0.9f64, 0.2f64);
        let big_r = r.hypot(y);
        let a = m.at(r, y).unwrap();
        let b = m.at_spherical(big_r, (y / big_r).asin()).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        let _ = FRAC_PI_4;
    }

    #[test]
    fn sinh_family() {
        let u = |y: f64| eval_sinh_family(1.0, y).unwrap();
        let h = 1e-3;
        let y = 1.0;
        let upp = (-u(y - 2.0 * h) + 16.0 * u(y - h) - 30.0 * u(y) + 16.0 * u(y + h) - u(y + 2.0 * h)) / (12.0 * h * h);
        assert!((-upp + (2.0 * u(y)).exp()).abs() < 1e-9);
        // exact identity u'' = C²/sinh²(Cy)
        assert!(((2.0 * u(y)).exp() - 1.0 / 1f64.sinh().powi(2)).abs() < 1e-14);
        assert!((eval_sinh_family(1e-8, 0.3).unwrap() + 0.3f64.ln()).abs() < 1e-12);
        let c = 2.0f64;
        assert!((eval_sinh_family(c, 30.0).unwrap() - ((2.0 * c).ln() - c * 30.0)).abs() < 1e-12);
    }
}

//! The reduced ODE `-1 - u'' + e^{2u} = 0` with `u ~ -log y` at `y = 0` and
//! `u -> 0` as `y -> ∞`.
//!
//! Its first integral gives `y(u) = ∫_u^∞ ds / sqrt(e^{2s} - 2s - 1)`, which is
//! evaluated in the variable `t = log s` and inverted by safeguarded Newton
//! steps.

use crate::error::{Error, Result};
use crate::scalar::{exp2_minus_linear, fit_slope, Real};

/// Quadrature rule used to evaluate `y(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    AdaptiveSimpson,
    GaussKronrod15,
}

const S_CUT: f64 = 40.0;

fn first_integral<T: Real>(u: T) -> T {
    exp2_minus_linear(u)
}

/// Integrand in `t = log s`.
fn integrand<T: Real>(t: T) -> T {
    let s = t.exp();
    s / first_integral(s).sqrt()
}

/// `∫_S^∞ ds / sqrt(e^{2s} - 2s - 1)` for `S >= 40`.
fn tail<T: Real>(s: T) -> T {
    let two = T::lit(2.0);
    let eps = (two * s + T::one()) * (-two * s).exp();
    (-s).exp() * (T::one() + eps / two)
}

/// `y(u)` for `u > 0`, to relative accuracy about `tol`.
pub fn y_of_u<T: Real>(u: T, rule: Quadrature, tol: T) -> Result<T> {
    if !(u > T::zero()) {
        return Err(Error::invalid("y(u) needs u > 0"));
    }
    let cut = T::lit(S_CUT);
    if u >= cut {
        return Ok(tail(u));
    }
    let (a, b) = (u.ln(), cut.ln());
    let tol = tol * (gk15(a, b).0 + tail(cut));
    let body = match rule {
        Quadrature::AdaptiveSimpson => simpson(a, b, tol)?,
        Quadrature::GaussKronrod15 => gauss_kronrod(a, b, tol)?,
    };
    Ok(body + tail(cut))
}

fn simpson<T: Real>(a: T, b: T, tol: T) -> Result<T> {
    let two = T::lit(2.0);
    let fa = integrand(a);
    let fb = integrand(b);
    let m = (a + b) / two;
    let fm = integrand(m);
    let whole = (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb);
    let mut evals = 0usize;
    let v = simpson_rec(a, b, fa, fm, fb, whole, tol, 60, &mut evals);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonConvergence {
            what: "adaptive Simpson quadrature".into(),
            iterations: evals,
            last_residual: f64::NAN,
            history: vec![],
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T: Real>(a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: usize, evals: &mut usize) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = integrand(lm);
    let frm = integrand(rm);
    *evals += 2;
    let six = T::lit(6.0);
    let four = T::lit(4.0);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol || delta.abs() <= T::epsilon() * (left + right).abs() {
        return left + right + delta / T::lit(15.0);
    }
    simpson_rec(a, m, fa, flm, fm, left, tol / two, depth - 1, evals)
        + simpson_rec(m, b, fm, frm, fb, right, tol / two, depth - 1, evals)
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<T: Real>(a: T, b: T) -> (T, T) {
    let two = T::lit(2.0);
    let c = (a + b) / two;
    let h = (b - a) / two;
    let mut kron = T::zero();
    let mut gauss = T::zero();
    for (i, (&x, &w)) in GK_NODES.iter().zip(&GK_WEIGHTS).enumerate() {
        let dx = h * T::lit(x);
        let f = if i == 7 { integrand(c) } else { integrand(c - dx) + integrand(c + dx) };
        kron = kron + T::lit(w) * f;
        if i % 2 == 1 {
            gauss = gauss + T::lit(G_WEIGHTS[i / 2]) * f;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

fn gauss_kronrod<T: Real>(a: T, b: T, tol: T) -> Result<T> {
    let mut stack = vec![(a, b, tol)];
    let mut total = T::zero();
    let mut count = 0usize;
    let two = T::lit(2.0);
    while let Some((lo, hi, t)) = stack.pop() {
        count += 1;
        if count > 100_000 {
            return Err(Error::NonConvergence {
                what: "Gauss-Kronrod quadrature".into(),
                iterations: count,
                last_residual: f64::NAN,
                history: vec![],
            });
        }
        let (v, err) = gk15(lo, hi);
        if err <= t || err <= T::epsilon() * T::lit(8.0) * v.abs() || (hi - lo) < T::epsilon() * T::lit(64.0) * (T::one() + lo.abs()) {
            total = total + v;
        } else {
            let m = (lo + hi) / two;
            stack.push((lo, m, t / two));
            stack.push((m, hi, t / two));
        }
    }
    Ok(total)
}

/// Solves `y(u) = y_target` for `u`.
pub fn invert<T: Real>(y_target: T, rule: Quadrature, tol: T) -> Result<T> {
    if !(y_target > T::zero()) {
        return Err(Error::invalid("y must be positive"));
    }
    let qtol = tol * T::lit(1e-3);
    let f = |t: T| -> Result<T> { Ok(y_of_u(t.exp(), rule, qtol)? - y_target) };
    // y(u) > e^{-u}, so u* > -log y*.
    let mut lo = (-y_target.ln()).max(T::lit(1e-20)).ln();
    while f(lo)? < T::zero() {
        lo = lo - T::lit(20.0);
        if lo < T::lit(-700.0) {
            return Err(Error::invalid("y too large for the tabulated branch"));
        }
    }
    let mut hi = (-y_target.ln()).max(T::zero()) + T::one();
    hi = hi.max(T::one()).ln();
    while f(hi)? > T::zero() {
        hi = hi + T::LN_2();
    }
    let mut t = (lo + hi) / T::lit(2.0);
    for it in 0..200 {
        let ft = f(t)?;
        if ft > T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let u = t.exp();
        let dfdt = -u / first_integral(u).sqrt();
        let mut next = t - ft / dfdt;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo + hi) / T::lit(2.0);
        }
        let step = (next - t).abs();
        t = next;
        if step <= tol * T::lit(1e-2) || (hi - lo) <= T::epsilon() * T::lit(4.0) * t.abs().max(T::one()) {
            return Ok(t.exp());
        }
        if it == 199 {
            break;
        }
    }
    Err(Error::NonConvergence {
        what: "ODE inversion".into(),
        iterations: 200,
        last_residual: f(t)?.to_f64_lossy(),
        history: vec![],
    })
}

/// Tabulated solution of the reduced ODE.
#[derive(Clone, Debug)]
pub struct OdeSolution<T> {
    pub y: Vec<T>,
    pub u: Vec<T>,
    /// `u'(y) = -sqrt(e^{2u} - 2u - 1)` at the nodes.
    pub du: Vec<T>,
    /// Far-field fit `u ≈ C e^{-rate y}` on `y ∈ [5, 10]`.
    pub c: T,
    pub rate: T,
    /// Largest `|y(u_k) - y_k|` relative to `y_k`, re-evaluated with the
    /// second quadrature rule.
    pub inversion_defect: T,
    pub tol: T,
}

pub const TABLE_Y_MIN: f64 = 1e-6;
pub const TABLE_Y_MAX: f64 = 30.0;
const NODES_PER_DECADE: usize = 160;

/// Solves the reduced ODE by quadrature inversion and tabulates it.
pub fn solve_mikhaylov_ode<T: Real>(tol: T) -> Result<OdeSolution<T>> {
    if !(tol > T::lit(1e-14) && tol < T::lit(1e-4)) {
        return Err(Error::invalid("tolerance out of range (1e-14, 1e-4)"));
    }
    let (lo, hi) = (TABLE_Y_MIN.log10(), TABLE_Y_MAX.log10());
    let count = ((hi - lo) * NODES_PER_DECADE as f64).ceil() as usize + 1;
    let ys: Vec<T> = (0..count)
        .map(|k| T::lit(10f64.powf(lo + (hi - lo) * k as f64 / (count - 1) as f64)))
        .collect();
    let mut u = Vec::with_capacity(count);
    let mut du = Vec::with_capacity(count);
    for &y in &ys {
        let v = invert(y, Quadrature::GaussKronrod15, tol)?;
        u.push(v);
        du.push(-first_integral(v).sqrt());
    }
    let mut defect = T::zero();
    for (k, (&y, &v)) in ys.iter().zip(&u).enumerate() {
        if k % 16 == 0 {
            let back = y_of_u(v, Quadrature::AdaptiveSimpson, tol * T::lit(1e-3))?;
            defect = defect.max((back - y).abs() / y);
        }
    }
    let (fy, fl): (Vec<T>, Vec<T>) = ys
        .iter()
        .zip(&u)
        .filter(|(&y, _)| y >= T::lit(5.0) && y <= T::lit(10.0))
        .map(|(&y, &v)| (y, v.ln()))
        .unzip();
    let slope = fit_slope(&fy, &fl);
    let mean_y = fy.iter().copied().sum::<T>() / T::of(fy.len());
    let mean_l = fl.iter().copied().sum::<T>() / T::of(fl.len());
    let c = (mean_l - slope * mean_y).exp();
    Ok(OdeSolution { y: ys, u, du, c, rate: -slope, inversion_defect: defect, tol })
}

impl<T: Real> OdeSolution<T> {
    /// `u(y)` by cubic Hermite interpolation in `log y`; outside the table
    /// the quadrature inversion is evaluated directly.
    pub fn eval(&self, y: T) -> Result<T> {
        if !(y > T::zero()) {
            return Err(Error::invalid("u(y) needs y > 0"));
        }
        let n = self.y.len();
        if y < self.y[0] || y > self.y[n - 1] {
            return invert(y, Quadrature::GaussKronrod15, self.tol);
        }
        let k = match self.y.binary_search_by(|p| p.partial_cmp(&y).unwrap()) {
            Ok(k) => return Ok(self.u[k]),
            Err(k) => k - 1,
        };
        let (x0, x1) = (self.y[k].ln(), self.y[k + 1].ln());
        let h = x1 - x0;
        let t = (y.ln() - x0) / h;
        let (p0, p1) = (self.u[k], self.u[k + 1]);
        let (m0, m1) = (self.du[k] * self.y[k] * h, self.du[k + 1] * self.y[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        Ok(h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1)
    }

    /// `u'(y)` from the first integral.
    pub fn derivative(&self, y: T) -> Result<T> {
        Ok(-first_integral(self.eval(y)?).sqrt())
    }

    /// Largest relative defect of `(u')² = e^{2u} - 2u - 1` at sample points,
    /// with `u'` from Richardson-extrapolated central differences of fresh
    /// inversions.
    pub fn first_integral_defect(&self, samples: &[T]) -> Result<T> {
        let mut worst = T::zero();
        let rule = Quadrature::GaussKronrod15;
        let tol = self.tol.min(T::lit(1e-12));
        for &y in samples {
            let h = y * T::lit(1e-2);
            let d = |h: T| -> Result<T> {
                Ok((invert(y + h, rule, tol)? - invert(y - h, rule, tol)?) / (T::lit(2.0) * h))
            };
            let (d1, d2) = (d(h)?, d(h / T::lit(2.0))?);
            let du = (T::lit(4.0) * d2 - d1) / T::lit(3.0);
            let g = first_integral(invert(y, rule, tol)?);
            worst = worst.max((du * du - g).abs() / g);
        }
        Ok(worst)
    }

    pub fn is_monotone_positive(&self) -> bool {
        self.u.iter().all(|&v| v > T::zero())
            && self.u.windows(2).all(|w| w[1] < w[0])
            && self.du.iter().all(|&d| d < T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratures_agree() {
        for u in [1e-6f64, 0.01, 0.5, 3.0, 25.0] {
            let a = y_of_u(u, Quadrature::AdaptiveSimpson, 1e-13).unwrap();
            let b = y_of_u(u, Quadrature::GaussKronrod15, 1e-13).unwrap();
            assert!((a - b).abs() <= 1e-10 * b, "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn large_u_matches_exponential() {
        let y = y_of_u(30.0f64, Quadrature::GaussKronrod15, 1e-14).unwrap();
        assert!((y / (-30f64).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inversion_roundtrip() {
        for y in [1e-4f64, 0.3, 1.0, 7.0] {
            let u = invert(y, Quadrature::GaussKronrod15, 1e-12).unwrap();
            let back = y_of_u(u, Quadrature::AdaptiveSimpson, 1e-14).unwrap();
            assert!((back - y).abs() < 1e-10 * y.max(1.0));
        }
    }

    #[test]
    fn table_properties() {
        let sol = solve_mikhaylov_ode(1e-10f64).unwrap();
        assert!(sol.is_monotone_positive());
        assert!(sol.inversion_defect < 1e-9);
        assert!((sol.rate - 2f64.sqrt()).abs() < 0.01 * 2f64.sqrt());
        for y in [0.0123f64, 0.77, 2.5] {
            let direct = invert(y, Quadrature::GaussKronrod15, 1e-12).unwrap();
            assert!((sol.eval(y).unwrap() - direct).abs() < 1e-8);
        }
        assert!(solve_mikhaylov_ode(1.0f64).is_err());
    }
}

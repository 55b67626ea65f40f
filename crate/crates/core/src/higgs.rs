//! Coefficient data of the scalar equation: curvature, Higgs weights,
//! conformal factor and knots.

use num_complex::Complex;

use crate::domain::{DomainKind, GradedGrid, KnotPoint};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalar coefficient on the horizontal domain.
#[derive(Clone, Debug)]
pub enum Coefficient<T> {
    Constant(T),
    /// One value per horizontal node of the grid the data is used with.
    Nodal(Vec<T>),
}

impl<T: Real> Coefficient<T> {
    pub fn at(&self, h: usize) -> T {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Nodal(v) => v[h],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }

    pub fn constant_value(&self) -> Option<T> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Nodal(_) => None,
        }
    }

    pub fn to_nodal(&self, n: usize) -> Vec<T> {
        (0..n).map(|h| self.at(h)).collect()
    }

    fn check_len(&self, n: usize, name: &str) -> Result<()> {
        if let Coefficient::Nodal(v) = self {
            if v.len() != n {
                return Err(Error::invalid(format!(
                    "{name} has {} values but the horizontal grid has {n} nodes",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    fn all(&self, n: usize, pred: impl Fn(T) -> bool) -> bool {
        (0..n).all(|h| pred(self.at(h)))
    }
}

/// Complex polynomial with ascending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<T> {
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(mut coeffs: Vec<Complex<T>>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == T::zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs.last().is_some_and(|c| c.norm() == T::zero()) {
            return Err(Error::invalid("polynomial must be nonzero"));
        }
        Ok(Self { coeffs })
    }

    pub fn real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex::new(T::lit(c), T::zero())).collect())
    }

    /// `lead * prod (z - root)`.
    pub fn from_roots(lead: Complex<T>, roots: &[Complex<T>]) -> Result<Self> {
        let mut c = vec![lead];
        for &r in roots {
            let mut next = vec![Complex::new(T::zero(), T::zero()); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] = next[k + 1] + ck;
                next[k] = next[k] - ck * r;
            }
            c = next;
        }
        Self::new(c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex<T> {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        if self.degree() == 0 {
            return Self { coeffs: vec![Complex::new(T::zero(), T::zero())] };
        }
        let coeffs = self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * T::of(k)).collect();
        Self { coeffs }
    }

    /// Synthetic division by `(z - root)`; returns quotient and remainder.
    pub fn divide_linear(&self, root: Complex<T>) -> (Self, Complex<T>) {
        let n = self.degree();
        if n == 0 {
            return (Self { coeffs: vec![Complex::new(T::zero(), T::zero())] }, self.coeffs[0]);
        }
        let mut q = vec![Complex::new(T::zero(), T::zero()); n];
        let mut acc = self.coeffs[n];
        for k in (0..n).rev() {
            q[k] = acc;
            acc = self.coeffs[k] + acc * root;
        }
        (Self { coeffs: q }, acc)
    }

    /// Removes the factor `(z - root)^order`; also returns the largest
    /// remainder met, relative to the coefficient scale.
    pub fn deflate(&self, root: Complex<T>, order: usize) -> (Self, T) {
        let scale = self.coeffs.iter().fold(T::zero(), |m, c| m.max(c.norm()));
        let mut p = self.clone();
        let mut worst = T::zero();
        for _ in 0..order {
            let (q, rem) = p.divide_linear(root);
            let local = p.coeffs.iter().fold(T::zero(), |m, c| m.max(c.norm())).max(scale);
            worst = worst.max(rem.norm() / local);
            p = q;
        }
        (p, worst)
    }

    /// Coefficients of `z -> p(z + shift)`.
    pub fn shifted(&self, shift: Complex<T>) -> Self {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.coeffs.len()];
        for &c in self.coeffs.iter().rev() {
            let mut next = vec![Complex::new(T::zero(), T::zero()); out.len()];
            for k in 0..out.len() {
                if k + 1 < out.len() {
                    next[k + 1] = next[k + 1] + out[k];
                }
                next[k] = next[k] + out[k] * shift;
            }
            next[0] = next[0] + c;
            out = next;
        }
        Self { coeffs: out }
    }
}

/// Source of the weight `|α|²`.
#[derive(Clone, Debug)]
pub enum AlphaSource<T> {
    /// Prescribed `|α|²` values.
    Field(Coefficient<T>),
    /// `α = p(z)` on the plane; knots sit at the roots.
    Poly(Polynomial<T>),
}

/// Coefficients `K`, `|α|²`, `|β|²`, `g0²` and the knot set.
#[derive(Clone, Debug)]
pub struct HiggsData<T> {
    pub curvature: Coefficient<T>,
    pub alpha: AlphaSource<T>,
    pub beta_sq: Coefficient<T>,
    pub g0_sq: Coefficient<T>,
    pub knots: Vec<KnotPoint<T>>,
}

/// Relative tolerance for the root check of polynomial Higgs data.
pub const ROOT_TOLERANCE: f64 = 1e-8;

impl<T: Real> HiggsData<T> {
    /// Constant coefficients on a flat background without knots.
    pub fn constant(k: T, alpha_sq: T, beta_sq: T) -> Self {
        Self {
            curvature: Coefficient::Constant(k),
            alpha: AlphaSource::Field(Coefficient::Constant(alpha_sq)),
            beta_sq: Coefficient::Constant(beta_sq),
            g0_sq: Coefficient::Constant(T::one()),
            knots: vec![],
        }
    }

    /// Plane data `α = p(z)`, `K = 0`, `β = 0`, `g0 = 1` with knots at the
    /// supplied roots.
    pub fn plane(p: Polynomial<T>, knots: Vec<KnotPoint<T>>) -> Result<Self> {
        check_roots(&p, &knots)?;
        Ok(Self {
            curvature: Coefficient::Constant(T::zero()),
            alpha: AlphaSource::Poly(p),
            beta_sq: Coefficient::Constant(T::zero()),
            g0_sq: Coefficient::Constant(T::one()),
            knots,
        })
    }

    pub fn polynomial(&self) -> Option<&Polynomial<T>> {
        match &self.alpha {
            AlphaSource::Poly(p) => Some(p),
            AlphaSource::Field(_) => None,
        }
    }

    /// `|α|²` at horizontal node `h` with position `z`.
    pub fn alpha_sq(&self, h: usize, z: Complex<T>) -> T {
        match &self.alpha {
            AlphaSource::Field(c) => c.at(h),
            AlphaSource::Poly(p) => p.eval(z).norm_sqr(),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.g0_sq, Coefficient::Constant(g) if g == T::one())
    }

    /// Checks the data against a grid and its domain kind.
    pub fn validate_for(&self, grid: &GradedGrid<T>) -> Result<()> {
        let n = grid.horizontal_len();
        self.curvature.check_len(n, "K")?;
        self.beta_sq.check_len(n, "|β|²")?;
        self.g0_sq.check_len(n, "g0²")?;
        if !self.curvature.all(n, |v| v.is_finite()) {
            return Err(Error::invalid("K must be finite"));
        }
        if !self.beta_sq.all(n, |v| v >= T::zero() && v.is_finite()) {
            return Err(Error::invalid("|β|² must be finite and nonnegative"));
        }
        if !self.g0_sq.all(n, |v| v > T::zero() && v.is_finite()) {
            return Err(Error::invalid("g0² must be positive"));
        }
        match &self.alpha {
            AlphaSource::Field(c) => {
                c.check_len(n, "|α|²")?;
                if !c.all(n, |v| v >= T::zero() && v.is_finite()) {
                    return Err(Error::invalid("|α|² must be finite and nonnegative"));
                }
                if !self.knots.is_empty() {
                    return Err(Error::UnsupportedData(
                        "knots require polynomial α data (α = p(z))".into(),
                    ));
                }
            }
            AlphaSource::Poly(p) => {
                check_roots(p, &self.knots)?;
                let flat_plane = self.curvature.constant_value() == Some(T::zero())
                    && self.beta_sq.constant_value() == Some(T::zero())
                    && self.is_flat();
                if !flat_plane {
                    return Err(Error::UnsupportedData(
                        "polynomial α data requires K = 0, |β|² = 0 and g0 = 1".into(),
                    ));
                }
                if !matches!(grid.kind, DomainKind::PlaneHalfSpace | DomainKind::AxisymSlab) {
                    return Err(Error::UnsupportedData(
                        "polynomial α data is only supported on the plane".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Heuristic degree bookkeeping warnings (never fatal).
    pub fn consistency_warnings(&self, grid: &GradedGrid<T>) -> Vec<String> {
        let mut out = Vec::new();
        if grid.kind != DomainKind::TorusHalfCylinder && grid.kind != DomainKind::LimitSurface {
            return out;
        }
        let n = grid.horizontal_len();
        let weights = horizontal_weights(grid);
        let mut int_k = T::zero();
        let mut int_a = T::zero();
        let mut int_b = T::zero();
        for h in 0..n {
            let w = weights[h] * self.g0_sq.at(h);
            int_k = int_k + w * self.curvature.at(h);
            int_a = int_a + w * self.alpha_sq(h, grid.z_of_horizontal(h));
            int_b = int_b + w * self.beta_sq.at(h);
        }
        if int_a == T::zero() {
            out.push("|α|² vanishes identically: the pair is unstable".into());
        }
        if int_k >= T::zero() && int_b == T::zero() {
            out.push(format!(
                "∫K = {int_k} is not negative while |β|² = 0: no solution is expected as y → ∞"
            ));
        }
        out
    }
}

/// Trapezoid weights of the horizontal factor of a grid.
pub fn horizontal_weights<T: Real>(grid: &GradedGrid<T>) -> Vec<T> {
    let axes: Vec<Vec<T>> = grid.horizontal_axes().map(|a| grid.axes[a].trapezoid_weights()).collect();
    let nh = grid.horizontal_len();
    let nv = grid.vertical_len();
    (0..nh)
        .map(|h| {
            let m = grid.unravel(h * nv);
            axes.iter().enumerate().fold(T::one(), |acc, (a, w)| acc * w[m[a]])
        })
        .collect()
}

fn check_roots<T: Real>(p: &Polynomial<T>, knots: &[KnotPoint<T>]) -> Result<()> {
    let total: usize = knots.iter().map(|k| k.order).sum();
    if total != p.degree() {
        return Err(Error::invalid(format!(
            "knot orders sum to {total} but deg p = {}",
            p.degree()
        )));
    }
    let mut q = p.clone();
    for k in knots {
        let (next, rem) = q.deflate(k.position, k.order);
        if rem > T::lit(ROOT_TOLERANCE) {
            return Err(Error::invalid(format!(
                "knot at ({}, {}) of order {} is not a root of p (relative remainder {:e})",
                k.position.re, k.position.im, k.order, rem
            )));
        }
        q = next;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn roots_and_deflation() {
        let p = Polynomial::from_roots(c(2.0, 0.0), &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(p.degree(), 3);
        let (q, rem) = p.deflate(c(1.0, 0.0), 2);
        assert!(rem < 1e-14);
        assert!((q.eval(c(1.0, 0.0)) - c(2.0, 0.0) * c(1.0, -1.0)).norm() < 1e-14);
        let knots = vec![KnotPoint::at(1.0, 0.0, 2).unwrap(), KnotPoint::at(0.0, 1.0, 1).unwrap()];
        assert!(HiggsData::plane(p.clone(), knots).is_ok());
        let bad = vec![KnotPoint::at(1.0, 0.0, 1).unwrap(), KnotPoint::at(0.0, 2.0, 2).unwrap()];
        assert!(HiggsData::plane(p, bad).is_err());
    }

    #[test]
    fn derivative_and_shift() {
        let p = Polynomial::<f64>::real(&[1.0, 2.0, 3.0]).unwrap();
        let d = p.derivative();
        assert_eq!(d.coeffs, vec![c(2.0, 0.0), c(6.0, 0.0)]);
        let s = p.shifted(c(0.5, -0.25));
        for z in [c(0.3, 0.1), c(-1.0, 2.0)] {
            assert!((s.eval(z) - p.eval(z + c(0.5, -0.25))).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_polynomial_has_no_knots() {
        let p = Polynomial::<f64>::real(&[1.0]).unwrap();
        assert!(HiggsData::plane(p, vec![]).is_ok());
        assert!(Polynomial::<f64>::real(&[0.0]).is_err());
    }
}

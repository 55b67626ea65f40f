//! Hermitian metrics, unitary-gauge triplets, the extended Bogomolny
//! residuals and the distance `σ` between metrics.
//!
//! Complex derivatives follow `∂ = ∂_{x} - i∂_{x₃}`, `∂̄ = ∂_{x} + i∂_{x₃}`,
//! so `∂̄∂ = Δ`. On axisymmetric slabs fields are stored on the `θ = 0`
//! half-plane and every matrix entry carries an angular mode `m`: the entry
//! at angle `θ` is `e^{imθ}` times the stored value, and
//! `∂̄(e^{imθ} f) = e^{i(m+1)θ}(f' - m f / r)`,
//! `∂(e^{imθ} f) = e^{i(m-1)θ}(f' + m f / r)`.

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex;

use crate::domain::{DomainKind, GradedGrid, NodeClass, ScalarField};
use crate::error::{Error, Result};
use crate::higgs::{AlphaSource, Coefficient, HiggsData};
use crate::model::closed_form::eval_sn;
use crate::scalar::{fit_slope, Real};
use crate::solver::operator::Laplacian;

/// 2x2 complex matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T> {
    pub m: [[Complex<T>; 2]; 2],
}

fn c<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

impl<T: Real> Mat2<T> {
    pub fn new(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn zero() -> Self {
        let z = c(T::zero());
        Self::new(z, z, z, z)
    }

    pub fn identity() -> Self {
        Self::real_diag(T::one(), T::one())
    }

    pub fn real_diag(a: T, d: T) -> Self {
        let z = c(T::zero());
        Self::new(c(a), z, z, c(d))
    }

    /// `diag(1, -1)`.
    pub fn sigma3() -> Self {
        Self::real_diag(T::one(), -T::one())
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn trace(&self) -> Complex<T> {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> Complex<T> {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if !(d.norm() > T::zero()) || !(d.re.is_finite() && d.im.is_finite()) {
            return None;
        }
        let m = &self.m;
        Some(Self::new(m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let m = &self.m;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn commutator(&self, o: &Self) -> Self {
        *self * *o - *o * *self
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.m.iter().flatten().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (&self.m, &o.m);
        Self::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<T: Real> Neg for Mat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(c(-T::one()))
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (&self.m, &o.m);
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Angular modes of a matrix field: entry `(j, k)` has mode
/// `shift + weights[j] - weights[k]`. Ignored off axisymmetric grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Modes {
    pub shift: i32,
    pub weights: [i32; 2],
}

impl Modes {
    pub fn new(shift: i32, weights: [i32; 2]) -> Self {
        Self { shift, weights }
    }

    pub fn of(&self, j: usize, k: usize) -> i32 {
        self.shift + self.weights[j] - self.weights[k]
    }

    fn shifted(self, by: i32) -> Self {
        Self { shift: self.shift + by, ..self }
    }
}

/// Nodal 2x2 matrix field. `valid[i]` is false where the value is not
/// finite or a difference stencil behind it was incomplete.
#[derive(Clone, Debug)]
pub struct MatrixField<T> {
    pub values: Vec<Mat2<T>>,
    pub modes: Modes,
    pub valid: Vec<bool>,
}

impl<T: Real> MatrixField<T> {
    pub fn from_fn(n: usize, modes: Modes, f: impl Fn(usize) -> Mat2<T>) -> Self {
        let values: Vec<Mat2<T>> = (0..n).map(f).collect();
        let valid = values.iter().map(Mat2::is_finite).collect();
        Self { values, modes, valid }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> Option<Mat2<T>> {
        self.valid[i].then_some(self.values[i])
    }

    fn zip(&self, o: &Self, modes: Modes, f: impl Fn(Mat2<T>, Mat2<T>) -> Mat2<T>) -> Self {
        let values = self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect();
        let valid = self.valid.iter().zip(&o.valid).map(|(&a, &b)| a && b).collect();
        Self { values, modes, valid }
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.modes.weights, o.modes.weights);
        self.zip(o, self.modes.shifted(o.modes.shift), |a, b| a * b)
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, self.modes, |a, b| a + b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, self.modes, |a, b| a - b)
    }

    pub fn commutator(&self, o: &Self) -> Self {
        self.zip(o, self.modes.shifted(o.modes.shift), |a, b| a.commutator(&b))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { values: self.values.iter().map(|a| a.scale(s)).collect(), modes: self.modes, valid: self.valid.clone() }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            values: self.values.iter().map(Mat2::adjoint).collect(),
            modes: Modes { shift: -self.modes.shift, weights: self.modes.weights },
            valid: self.valid.clone(),
        }
    }
}

/// Entrywise second-order centred derivative along axis `a`.
fn axis_derivative<T: Real>(grid: &GradedGrid<T>, a: usize, f: &MatrixField<T>) -> MatrixField<T> {
    let axis = &grid.axes[a];
    let n = axis.len();
    let stride = grid.strides()[a];
    let x = &axis.nodes;
    let mut values = vec![Mat2::zero(); f.len()];
    let mut valid = vec![false; f.len()];
    for i in 0..f.len() {
        let k = grid.unravel(i)[a];
        let (il, ir, hl, hr) = match axis.period() {
            Some(p) => {
                let h = p / T::of(n);
                let il = if k == 0 { i + (n - 1) * stride } else { i - stride };
                let ir = if k + 1 == n { i - (n - 1) * stride } else { i + stride };
                (il, ir, h, h)
            }
            None if k == 0 || k + 1 == n => continue,
            None => (i - stride, i + stride, x[k] - x[k - 1], x[k + 1] - x[k]),
        };
        if !(f.valid[i] && f.valid[il] && f.valid[ir]) {
            continue;
        }
        let cl = -hr / (hl * (hl + hr));
        let c0 = (hr - hl) / (hl * hr);
        let cr = hl / (hr * (hl + hr));
        values[i] = f.values[il].scale(c(cl)) + f.values[i].scale(c(c0)) + f.values[ir].scale(c(cr));
        valid[i] = true;
    }
    MatrixField { values, modes: f.modes, valid }
}

/// `∂_y f`.
pub fn d_y<T: Real>(grid: &GradedGrid<T>, f: &MatrixField<T>) -> MatrixField<T> {
    match grid.vertical_axis() {
        Some(a) => axis_derivative(grid, a, f),
        None => MatrixField { values: vec![Mat2::zero(); f.len()], modes: f.modes, valid: f.valid.clone() },
    }
}

/// `∂̄ f` (`sign = 1`) or `∂ f` (`sign = -1`).
fn d_complex<T: Real>(grid: &GradedGrid<T>, f: &MatrixField<T>, sign: i32) -> MatrixField<T> {
    let modes = f.modes.shifted(sign);
    match grid.kind {
        DomainKind::OdeLine => MatrixField { values: vec![Mat2::zero(); f.len()], modes, valid: f.valid.clone() },
        DomainKind::AxisymSlab => {
            let mut d = axis_derivative(grid, 0, f);
            for i in 0..f.len() {
                let r = grid.z(i).re;
                if r == T::zero() {
                    d.valid[i] = false;
                    continue;
                }
                for j in 0..2 {
                    for k in 0..2 {
                        let m = T::lit(f64::from(sign * f.modes.of(j, k)));
                        d.values[i].m[j][k] = d.values[i].m[j][k] - f.values[i].m[j][k] * m / r;
                    }
                }
            }
            d.modes = modes;
            d
        }
        _ => {
            let dx = axis_derivative(grid, 0, f);
            let d3 = axis_derivative(grid, 1, f);
            let s = Complex::new(T::zero(), T::lit(f64::from(sign)));
            let mut out = dx.zip(&d3, modes, |a, b| a + b.scale(s));
            out.modes = modes;
            out
        }
    }
}

/// `∂̄ f = (∂_x + i∂_{x₃}) f`.
pub fn d_antiholomorphic<T: Real>(grid: &GradedGrid<T>, f: &MatrixField<T>) -> MatrixField<T> {
    d_complex(grid, f, 1)
}

/// `∂ f = (∂_x - i∂_{x₃}) f`.
pub fn d_holomorphic<T: Real>(grid: &GradedGrid<T>, f: &MatrixField<T>) -> MatrixField<T> {
    d_complex(grid, f, -1)
}

/// Background metric `h₀` on the horizontal nodes together with the
/// curvature `K` and conformal factor `g0²` of the frame it defines.
#[derive(Clone, Debug)]
pub struct Background<T> {
    pub log_h0: Vec<T>,
    pub curvature: Coefficient<T>,
    pub g0_sq: Coefficient<T>,
}

impl<T: Real> Background<T> {
    /// `h₀ = 1`, `K = 0`, `g0 = 1`.
    pub fn flat(grid: &GradedGrid<T>) -> Self {
        Self {
            log_h0: vec![T::zero(); grid.horizontal_len()],
            curvature: Coefficient::Constant(T::zero()),
            g0_sq: Coefficient::Constant(T::one()),
        }
    }

    /// `h₀ = 1` with the curvature and conformal factor of `data`.
    pub fn from_data(data: &HiggsData<T>, grid: &GradedGrid<T>) -> Self {
        Self { log_h0: vec![T::zero(); grid.horizontal_len()], curvature: data.curvature.clone(), g0_sq: data.g0_sq.clone() }
    }
}

#[derive(Clone, Debug)]
pub enum MetricRepr<T> {
    /// `H = diag(h₀eᵘ, h₀⁻¹e⁻ᵘ)`.
    Diagonal { u: Vec<T> },
    /// Positive-definite entries; `h₂₁ = conj(h₁₂)`. Entries are read as
    /// `θ`-independent on axisymmetric grids.
    General { h11: Vec<T>, h12: Vec<Complex<T>>, h22: Vec<T> },
}

#[derive(Clone, Debug)]
pub struct HermitianMetric<T> {
    pub grid: Arc<GradedGrid<T>>,
    pub repr: MetricRepr<T>,
    pub background: Background<T>,
}

impl<T: Real> HermitianMetric<T> {
    /// General metric; fails unless every node is finite and positive definite.
    pub fn general(
        grid: Arc<GradedGrid<T>>,
        h11: Vec<T>,
        h12: Vec<Complex<T>>,
        h22: Vec<T>,
        background: Background<T>,
    ) -> Result<Self> {
        let n = grid.len();
        if h11.len() != n || h12.len() != n || h22.len() != n {
            return Err(Error::invalid("metric entries do not match the grid"));
        }
        for i in 0..n {
            let det = h11[i] * h22[i] - h12[i].norm_sqr();
            if !(h11[i] > T::zero() && det > T::zero() && det.is_finite() && h12[i].re.is_finite() && h12[i].im.is_finite()) {
                return Err(Error::invalid(format!("metric is not positive definite at node {i}")));
            }
        }
        Ok(Self { grid, repr: MetricRepr::General { h11, h12, h22 }, background })
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.repr, MetricRepr::Diagonal { .. })
    }

    /// `log h₁₁` of a diagonal metric, `log h₀ + u`.
    pub fn log_ratio(&self, i: usize) -> Option<T> {
        match &self.repr {
            MetricRepr::Diagonal { u } => Some(self.background.log_h0[self.grid.horizontal_index(i)] + u[i]),
            MetricRepr::General { .. } => None,
        }
    }

    pub fn at(&self, i: usize) -> Mat2<T> {
        match &self.repr {
            MetricRepr::Diagonal { .. } => {
                let w = self.log_ratio(i).unwrap_or_else(T::nan);
                Mat2::real_diag(w.exp(), (-w).exp())
            }
            MetricRepr::General { h11, h12, h22 } => Mat2::new(c(h11[i]), h12[i], h12[i].conj(), c(h22[i])),
        }
    }

    pub fn h11(&self, i: usize) -> T {
        match &self.repr {
            MetricRepr::Diagonal { .. } => self.log_ratio(i).unwrap_or_else(T::nan).exp(),
            MetricRepr::General { h11, .. } => h11[i],
        }
    }

    fn log_h11(&self, i: usize) -> T {
        match &self.repr {
            MetricRepr::Diagonal { .. } => self.log_ratio(i).unwrap_or_else(T::nan),
            MetricRepr::General { h11, .. } => h11[i].ln(),
        }
    }
}

/// `H = diag(h, h⁻¹)` with `h = h₀eᵘ`.
pub fn metric_from_scalar<T: Real>(u: &ScalarField<T>, h0: Background<T>) -> Result<HermitianMetric<T>> {
    let grid = u.grid().clone();
    if h0.log_h0.len() != grid.horizontal_len() {
        return Err(Error::invalid("background metric does not match the horizontal grid"));
    }
    if let Some(i) = u.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("metric is not positive definite: u is not finite at node {i}")));
    }
    if h0.log_h0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("background metric must be finite and positive"));
    }
    Ok(HermitianMetric { grid, repr: MetricRepr::Diagonal { u: u.values().to_vec() }, background: h0 })
}

/// Holomorphic Higgs field `φ_z = [[t, α], [β, -t]]` on the horizontal nodes.
#[derive(Clone, Debug)]
pub struct HiggsField<T> {
    pub t: Vec<Complex<T>>,
    pub alpha: Vec<Complex<T>>,
    pub beta: Vec<Complex<T>>,
    /// Angular order `n` of `α = c rⁿ e^{inθ}` on axisymmetric grids.
    pub order: i32,
}

impl<T: Real> HiggsField<T> {
    /// `α = p(z)` for polynomial data, `α = |α|` and `β = |β|` for prescribed
    /// weights.
    pub fn from_data(data: &HiggsData<T>, grid: &GradedGrid<T>) -> Result<Self> {
        let nh = grid.horizontal_len();
        let zero = c(T::zero());
        let beta: Vec<Complex<T>> = (0..nh).map(|h| c(data.beta_sq.at(h).max(T::zero()).sqrt())).collect();
        let (alpha, order) = match &data.alpha {
            AlphaSource::Field(a) => ((0..nh).map(|h| c(a.at(h).max(T::zero()).sqrt())).collect(), 0),
            AlphaSource::Poly(p) => {
                let mut order = 0;
                if grid.is_axisymmetric() {
                    order = p.degree();
                    let (_, rem) = p.deflate(zero, order);
                    if rem > T::lit(crate::higgs::ROOT_TOLERANCE) {
                        return Err(Error::UnsupportedData(
                            "an axisymmetric Higgs field needs p = c zⁿ centred on the axis".into(),
                        ));
                    }
                }
                ((0..nh).map(|h| p.eval(grid.z_of_horizontal(h))).collect(), order as i32)
            }
        };
        if order > 0 && beta.iter().any(|b| b.norm() > T::zero()) {
            return Err(Error::UnsupportedData("β must vanish for an axisymmetric field with knots".into()));
        }
        Ok(Self { t: vec![zero; nh], alpha, beta, order })
    }

    /// `φ_z = E₁₂`.
    pub fn nilpotent(grid: &GradedGrid<T>) -> Self {
        let nh = grid.horizontal_len();
        Self { t: vec![c(T::zero()); nh], alpha: vec![c(T::one()); nh], beta: vec![c(T::zero()); nh], order: 0 }
    }

    pub fn with_trace(mut self, t: Complex<T>) -> Self {
        self.t.iter_mut().for_each(|x| *x = t);
        self
    }

    fn modes(&self) -> Modes {
        Modes::new(0, [self.order, 0])
    }

    fn field(&self, grid: &GradedGrid<T>) -> MatrixField<T> {
        MatrixField::from_fn(grid.len(), self.modes(), |i| {
            let h = grid.horizontal_index(i);
            Mat2::new(self.t[h], self.alpha[h], self.beta[h], -self.t[h])
        })
    }
}

/// Connection and Higgs fields in unitary gauge.
#[derive(Clone, Debug)]
pub struct UnitaryTriplet<T> {
    pub grid: Arc<GradedGrid<T>>,
    pub a_z: MatrixField<T>,
    pub a_zbar: MatrixField<T>,
    pub a_y: MatrixField<T>,
    pub phi_z: MatrixField<T>,
    /// `φ_z̄`, computed as `g⁻¹ φ† g`.
    pub phi_zbar: MatrixField<T>,
    pub phi1: MatrixField<T>,
    /// `K` and `g0²` on the horizontal nodes.
    pub curvature: Vec<T>,
    pub g0_sq: Vec<T>,
}

impl<T: Real> UnitaryTriplet<T> {
    /// Largest nodal defect of `A* = -A`, `φ* = φ`, `φ₁* = -φ₁`, relative to
    /// `1 + |field|`.
    pub fn unitarity_defect(&self) -> T {
        let rel = |a: &MatrixField<T>, b: &MatrixField<T>| {
            (0..a.len())
                .filter(|&i| a.valid[i] && b.valid[i])
                .map(|i| (a.values[i] + b.values[i]).norm() / (T::one() + a.values[i].norm()))
                .fold(T::zero(), T::max)
        };
        let a_z_adj = self.a_z.adjoint();
        let phi_adj = self.phi_z.adjoint().scale(c(-T::one()));
        let d1 = rel(&a_z_adj, &self.a_zbar);
        let d2 = rel(&self.a_y.adjoint(), &self.a_y);
        let d3 = rel(&self.phi1.adjoint(), &self.phi1);
        let d4 = rel(&phi_adj, &self.phi_zbar);
        d1.max(d2).max(d3).max(d4)
    }
}

/// `g = diag(e^{u/2}, e^{-u/2})`, `A_z = g⁻¹∂g`, `A_z̄ = -(∂̄g)g⁻¹`,
/// `φ_z = gφg⁻¹`, `A_y = ½((∂_y g)g⁻¹ - g⁻¹∂_y g)` and
/// `φ₁ = -(i/2)(g⁻¹∂_y g + (∂_y g)g⁻¹)`.
pub fn unitary_triplet<T: Real>(metric: &HermitianMetric<T>, varphi: &HiggsField<T>) -> Result<UnitaryTriplet<T>> {
    if !metric.is_diagonal() {
        return Err(Error::UnsupportedData("unitary reconstruction needs a diagonal metric".into()));
    }
    if varphi.t.iter().any(|t| t.norm() > T::zero()) {
        return Err(Error::UnsupportedData(
            "Higgs fields with a nonzero diagonal t are not reducible to the scalar equation".into(),
        ));
    }
    let grid = metric.grid.clone();
    let nh = grid.horizontal_len();
    if varphi.alpha.len() != nh || varphi.beta.len() != nh {
        return Err(Error::invalid("Higgs field does not match the horizontal grid"));
    }
    let n = grid.len();
    let modes = varphi.modes();
    let half = T::lit(0.5);
    let g = MatrixField::from_fn(n, modes, |i| {
        let w = metric.log_ratio(i).unwrap_or_else(T::nan);
        Mat2::real_diag((half * w).exp(), (-half * w).exp())
    });
    let g_inv = MatrixField::from_fn(n, modes, |i| {
        let w = metric.log_ratio(i).unwrap_or_else(T::nan);
        Mat2::real_diag((-half * w).exp(), (half * w).exp())
    });
    let phi = varphi.field(&grid);
    let a_z = g_inv.mul(&d_holomorphic(&grid, &g));
    let a_zbar = d_antiholomorphic(&grid, &g).mul(&g_inv).scale(c(-T::one()));
    let phi_z = g.mul(&phi).mul(&g_inv);
    let phi_zbar = g_inv.mul(&phi.adjoint()).mul(&g);
    let gy = d_y(&grid, &g);
    let left = g_inv.mul(&gy);
    let right = gy.mul(&g_inv);
    let a_y = right.sub(&left).scale(c(half));
    let phi1 = left.add(&right).scale(Complex::new(T::zero(), -half));
    let bg = &metric.background;
    Ok(UnitaryTriplet {
        a_z,
        a_zbar,
        a_y,
        phi_z,
        phi_zbar,
        phi1,
        curvature: bg.curvature.to_nodal(nh),
        g0_sq: bg.g0_sq.to_nodal(nh),
        grid,
    })
}

/// Nodal Frobenius norms of the three equations; `None` where a stencil was
/// incomplete.
#[derive(Clone, Debug)]
pub struct EbeResidual<T> {
    /// `K σ₃ - g0⁻²(∂̄A_z - ∂A_z̄ + [A_z̄, A_z]) - 2i(∂_yφ₁ + [A_y, φ₁]) + [φ_z, φ_z†]`.
    pub moment: Vec<Option<T>>,
    /// `∂̄φ_z + [A_z̄, φ_z]`.
    pub holomorphic: Vec<Option<T>>,
    /// `∂_yφ_z + [𝒜_y, φ_z]` and `∂̄𝒜_y - ∂_yA_z̄ + [A_z̄, 𝒜_y]` with
    /// `𝒜_y = A_y - iφ₁`.
    pub parallel: Vec<Option<T>>,
}

impl<T: Real> EbeResidual<T> {
    /// Largest of the three residuals over the nodes kept by `keep`.
    pub fn max_where(&self, keep: impl Fn(usize) -> bool) -> (T, T, T) {
        let m = |v: &[Option<T>]| max_over(v, &keep);
        (m(&self.moment), m(&self.holomorphic), m(&self.parallel))
    }
}

/// Maximum of the defined entries of `values` at nodes kept by `keep`.
pub fn max_over<T: Real>(values: &[Option<T>], keep: impl Fn(usize) -> bool) -> T {
    values
        .iter()
        .enumerate()
        .filter(|&(i, _)| keep(i))
        .filter_map(|(_, v)| *v)
        .fold(T::zero(), T::max)
}

fn norms<T: Real>(f: &MatrixField<T>) -> Vec<Option<T>> {
    (0..f.len()).map(|i| f.at(i).map(|m| m.norm()).filter(|v| v.is_finite())).collect()
}

pub fn ebe_residual<T: Real>(t: &UnitaryTriplet<T>) -> EbeResidual<T> {
    let grid = &t.grid;
    let n = grid.len();
    let i_unit = Complex::new(T::zero(), T::one());
    let mut curv = d_antiholomorphic(grid, &t.a_z)
        .sub(&d_holomorphic(grid, &t.a_zbar))
        .add(&t.a_zbar.commutator(&t.a_z));
    for i in 0..n {
        let h = grid.horizontal_index(i);
        curv.values[i] = curv.values[i].scale(c(-t.g0_sq[h].recip()));
    }
    let y_part = d_y(grid, &t.phi1).add(&t.a_y.commutator(&t.phi1)).scale(i_unit.scale(T::lit(-2.0)));
    let higgs = t.phi_z.commutator(&t.phi_z.adjoint());
    let k = MatrixField::from_fn(n, curv.modes, |i| Mat2::sigma3().scale(c(t.curvature[grid.horizontal_index(i)])));
    let moment = k.add(&curv).add(&y_part).add(&higgs);

    let holomorphic = d_antiholomorphic(grid, &t.phi_z).add(&t.a_zbar.commutator(&t.phi_z));

    let a_cal = t.a_y.sub(&t.phi1.scale(i_unit));
    let p1 = d_y(grid, &t.phi_z).add(&a_cal.commutator(&t.phi_z));
    let p2 = d_antiholomorphic(grid, &a_cal).sub(&d_y(grid, &t.a_zbar)).add(&t.a_zbar.commutator(&a_cal));
    let parallel = (0..n)
        .map(|i| match (p1.at(i), p2.at(i)) {
            (Some(a), Some(b)) => Some(a.norm().hypot(b.norm())).filter(|v| v.is_finite()),
            _ => None,
        })
        .collect();
    EbeResidual { moment: norms(&moment), holomorphic: norms(&holomorphic), parallel }
}

/// Nodal residual of `-g0⁻²∂̄(H⁻¹∂H) - ∂_y(H⁻¹∂_yH) + [φ, φ^{*H}] + K σ₃`
/// with `φ^{*H} = H⁻¹φ†H`.
#[derive(Clone, Debug)]
pub struct HermitianResidual<T> {
    pub values: Vec<Option<Mat2<T>>>,
}

impl<T: Real> HermitianResidual<T> {
    pub fn norms(&self) -> Vec<Option<T>> {
        self.values.iter().map(|m| m.map(|m| m.norm())).collect()
    }
}

/// Residual of the Hermitian form of the equations. Second derivatives use
/// the solver's finite-volume Laplacian; for diagonal metrics the `(1, 1)`
/// entry is the scalar residual of `log h₀ + u`.
pub fn hermitian_residual<T: Real>(metric: &HermitianMetric<T>, varphi: &HiggsField<T>) -> Result<HermitianResidual<T>> {
    let grid = &metric.grid;
    let nh = grid.horizontal_len();
    if varphi.alpha.len() != nh {
        return Err(Error::invalid("Higgs field does not match the horizontal grid"));
    }
    let bg = &metric.background;
    let lap = Laplacian::new(grid, &bg.g0_sq);
    let n = grid.len();
    let two = T::lit(2.0);
    let usable = |i: usize| grid.classify(i) == NodeClass::Interior && lap.complete_at(i);
    let commutator = |i: usize, h: Mat2<T>, h_inv: Mat2<T>| {
        let k = grid.horizontal_index(i);
        let phi = Mat2::new(varphi.t[k], varphi.alpha[k], varphi.beta[k], -varphi.t[k]);
        phi.commutator(&(h_inv * phi.adjoint() * h))
    };
    let values = match &metric.repr {
        MetricRepr::Diagonal { .. } => {
            let w: Vec<T> = (0..n).map(|i| metric.log_ratio(i).unwrap_or_else(T::nan)).collect();
            (0..n)
                .map(|i| {
                    if !usable(i) {
                        return None;
                    }
                    let k = grid.horizontal_index(i);
                    let r = bg.curvature.at(k) + lap.apply_at(&w, i) + varphi.alpha[k].norm_sqr() * (two * w[i]).exp()
                        - varphi.beta[k].norm_sqr() * (-two * w[i]).exp();
                    let t_part = if varphi.t[k].norm() > T::zero() {
                        let h = metric.at(i);
                        let full = commutator(i, h, h.inverse()?);
                        full - Mat2::sigma3().scale(c(full.m[0][0].re))
                    } else {
                        Mat2::zero()
                    };
                    r.is_finite().then(|| Mat2::sigma3().scale(c(r)) + t_part)
                })
                .collect()
        }
        MetricRepr::General { h11, h12, h22 } => {
            let hf = MatrixField::from_fn(n, Modes::new(0, [0, 0]), |i| metric.at(i));
            let (dh, dbh, dyh) = (d_holomorphic(grid, &hf), d_antiholomorphic(grid, &hf), d_y(grid, &hf));
            let re12: Vec<T> = h12.iter().map(|z| z.re).collect();
            let im12: Vec<T> = h12.iter().map(|z| z.im).collect();
            (0..n)
                .map(|i| {
                    if !usable(i) {
                        return None;
                    }
                    let k = grid.horizontal_index(i);
                    let h = metric.at(i);
                    let h_inv = h.inverse()?;
                    let l12 = Complex::new(lap.apply_at(&re12, i), lap.apply_at(&im12, i));
                    let lh = Mat2::new(c(lap.apply_at(h11, i)), l12, l12.conj(), c(lap.apply_at(h22, i)));
                    let (d, db, dy) = (dh.at(i)?, dbh.at(i)?, dyh.at(i)?);
                    let g0 = bg.g0_sq.at(k).recip();
                    let r = h_inv * lh
                        + (h_inv * db * h_inv * d).scale(c(g0))
                        + h_inv * dy * h_inv * dy
                        + commutator(i, h, h_inv)
                        + Mat2::sigma3().scale(c(bg.curvature.at(k)));
                    r.is_finite().then_some(r)
                })
                .collect()
        }
    };
    Ok(HermitianResidual { values })
}

fn same_grid<T: Real>(a: &GradedGrid<T>, b: &GradedGrid<T>) -> bool {
    a.kind == b.kind
        && a.axes.len() == b.axes.len()
        && a.axes.iter().zip(&b.axes).all(|(x, y)| x.nodes == y.nodes)
}

/// `σ = Tr(H₁⁻¹H₂) + Tr(H₂⁻¹H₁) - 4`; `8 sinh²(w/2)` for diagonal metrics
/// with `log h₁₁` gap `w`.
pub fn sigma_distance<T: Real>(h1: &HermitianMetric<T>, h2: &HermitianMetric<T>) -> Result<ScalarField<T>> {
    if !Arc::ptr_eq(&h1.grid, &h2.grid) && !same_grid(&h1.grid, &h2.grid) {
        return Err(Error::invalid(format!(
            "σ needs both metrics on one grid (got {} and {} nodes)",
            h1.grid.len(),
            h2.grid.len()
        )));
    }
    let n = h1.grid.len();
    let values = (0..n)
        .map(|i| match (h1.log_ratio(i), h2.log_ratio(i)) {
            (Some(a), Some(b)) => {
                let s = ((a - b) * T::lit(0.5)).sinh();
                Ok(T::lit(8.0) * s * s)
            }
            _ => {
                let (a, b) = (h1.at(i), h2.at(i));
                let (ai, bi) = match (a.inverse(), b.inverse()) {
                    (Some(x), Some(y)) => (x, y),
                    _ => return Err(Error::invalid(format!("singular metric at node {i}"))),
                };
                Ok(((ai * b).trace() + (bi * a).trace()).re - T::lit(4.0))
            }
        })
        .collect::<Result<Vec<T>>>()?;
    ScalarField::new(h1.grid.clone(), values)
}

#[derive(Clone, Debug)]
pub struct SubharmonicReport<T> {
    /// `(Δ_{g0} + ∂_y²)σ` at interior nodes with complete stencils.
    pub values: Vec<Option<T>>,
    pub min: T,
    pub argmin: Option<usize>,
    /// Nodes where the value falls below `-tol`.
    pub violations: Vec<usize>,
}

/// Discrete `(Δ_{g0} + ∂_y²)σ` with the solver's stencil and the nodes where
/// it is below `-tol`.
pub fn check_subharmonic<T: Real>(sigma: &ScalarField<T>, g0_sq: &Coefficient<T>, tol: T) -> SubharmonicReport<T> {
    let grid = sigma.grid();
    let lap = Laplacian::new(grid, g0_sq);
    let values: Vec<Option<T>> = (0..grid.len())
        .map(|i| {
            (grid.classify(i) == NodeClass::Interior && lap.complete_at(i)).then(|| -lap.apply_at(sigma.values(), i))
        })
        .collect();
    let mut min = T::infinity();
    let mut argmin = None;
    let mut violations = vec![];
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if v < min {
                min = v;
                argmin = Some(i);
            }
            if v < -tol {
                violations.push(i);
            }
        }
    }
    if argmin.is_none() {
        min = T::zero();
    }
    SubharmonicReport { values, min, argmin, violations }
}

#[derive(Clone, Debug)]
pub struct KnotFit<T> {
    pub knot: usize,
    pub order: usize,
    /// Fitted exponent of `y h₁₁` in `R` along the `ψ = π/4` ray
    /// (expected `-n`).
    pub r_exponent: T,
    /// Relative error of `y h₁₁ Rⁿ` against `(n+1) / (S_n(ψ) |q(p_j)|)` at the
    /// innermost sample.
    pub coefficient_error: T,
}

#[derive(Clone, Debug)]
pub struct AsymptoticsReport<T> {
    /// Mean fitted `y` exponent of `h₁₁` over horizontal nodes away from
    /// knots (expected `-1`), with its range.
    pub y_exponent: T,
    pub y_exponent_range: (T, T),
    /// Largest relative error of `y h₁₁` against `h₀ / |α|` at the lowest layer.
    pub coefficient_error: T,
    pub knots: Vec<KnotFit<T>>,
    /// Whether every fitted `y` exponent is within 0.1 of `-1`.
    pub nahm_pole: bool,
    pub samples: usize,
}

/// Largest `y` used for the boundary fit.
pub const BOUNDARY_FIT_HEIGHT: f64 = 0.1;
/// Number of samples along the knot ray.
pub const KNOT_RAY_SAMPLES: usize = 8;

/// Fits the leading boundary exponents of `h₁₁`: `y⁻¹` away from knots and
/// `(y Rⁿ)⁻¹` along the `ψ = π/4` ray from each knot.
pub fn boundary_asymptotics_check<T: Real>(metric: &HermitianMetric<T>, data: &HiggsData<T>) -> Result<AsymptoticsReport<T>> {
    let grid = &metric.grid;
    let v = grid.vertical_axis().ok_or_else(|| Error::invalid("boundary asymptotics need a vertical axis"))?;
    data.validate_for(grid)?;
    let ys = &grid.axes[v].nodes;
    let positive: Vec<usize> = (0..ys.len()).filter(|&k| ys[k] > T::zero()).collect();
    let y_cap = T::lit(BOUNDARY_FIT_HEIGHT).min(ys[ys.len() - 1] * T::lit(0.25));
    let mut layers: Vec<usize> = positive.iter().copied().filter(|&k| ys[k] <= y_cap).collect();
    if layers.len() < 3 {
        layers = positive.iter().copied().take(3).collect();
    }
    if layers.len() < 2 {
        return Err(Error::invalid("too few positive y layers for a boundary fit"));
    }
    let h_spacing = grid.horizontal_axes().map(|a| grid.axes[a].max_spacing()).fold(T::zero(), T::max);
    let clearance = T::lit(0.25).max(T::lit(4.0) * h_spacing);
    let nv = grid.vertical_len();
    let mut exps = vec![];
    let mut coef_err = T::zero();
    for hz in 0..grid.horizontal_len() {
        let z = grid.z_of_horizontal(hz);
        if grid.kind != DomainKind::OdeLine && data.knots.iter().any(|k| (k.position - z).norm() < clearance) {
            continue;
        }
        let xs: Vec<T> = layers.iter().map(|&k| ys[k].ln()).collect();
        let fs: Vec<T> = layers.iter().map(|&k| metric.log_h11(hz * nv + k)).collect();
        if fs.iter().any(|f| !f.is_finite()) {
            continue;
        }
        exps.push(fit_slope(&xs, &fs));
        let a = data.alpha_sq(hz, z).sqrt();
        if a > T::zero() {
            let k0 = layers[0];
            let expect = metric.background.log_h0[hz].exp() / a;
            coef_err = coef_err.max((ys[k0] * metric.h11(hz * nv + k0) - expect).abs() / expect);
        }
    }
    if exps.is_empty() {
        return Err(Error::invalid("no horizontal node is far enough from the knots for a boundary fit"));
    }
    let mean = exps.iter().copied().sum::<T>() / T::of(exps.len());
    let lo = exps.iter().copied().fold(T::infinity(), T::min);
    let hi = exps.iter().copied().fold(T::neg_infinity(), T::max);
    let nahm_pole = exps.iter().all(|e| (*e + T::one()).abs() < T::lit(0.1));

    let mut knots = vec![];
    if grid.kind != DomainKind::OdeLine {
        let logs: Vec<T> = (0..grid.len()).map(|i| metric.log_h11(i)).collect();
        let psi = T::FRAC_PI_4();
        let (s, co) = (psi.sin(), psi.cos());
        let y_top = ys[ys.len() - 1];
        let extent = grid.horizontal_axes().map(|a| grid.axes[a].nodes[grid.axes[a].len() - 1]).fold(T::infinity(), T::min);
        for (j, knot) in data.knots.iter().enumerate() {
            let sep = data
                .knots
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .map(|(_, o)| (o.position - knot.position).norm())
                .fold(T::infinity(), T::min);
            let r_lo = T::lit(4.0) * grid.max_spacing() / s;
            let room = (extent - knot.position.re).min(y_top / s).min(T::lit(0.5) * sep);
            let r_hi = T::lit(0.5) * room;
            if !(r_hi > r_lo * T::lit(1.5)) {
                return Err(Error::invalid(format!("grid too coarse for a knot fit around knot {j}")));
            }
            let m = KNOT_RAY_SAMPLES;
            let mut xs = vec![];
            let mut fs = vec![];
            for k in 0..m {
                let r = r_lo * (r_hi / r_lo).powf(T::of(k) / T::of(m - 1));
                let y = r * s;
                let z = knot.position + Complex::new(r * co, T::zero());
                let Some(w) = grid.interpolate(&logs, z, y) else { continue };
                xs.push(r.ln());
                fs.push(w + y.ln());
            }
            if xs.len() < 3 {
                return Err(Error::invalid(format!("knot ray around knot {j} leaves the grid")));
            }
            let slope = fit_slope(&xs, &fs);
            let n = knot.order;
            let coefficient_error = match data.polynomial() {
                Some(p) => {
                    let (q, _) = p.deflate(knot.position, n);
                    let qn = q.eval(knot.position).norm();
                    let expect = T::of(n + 1) / (eval_sn(n, psi) * qn);
                    let got = (fs[0] + T::of(n) * xs[0]).exp();
                    (got - expect).abs() / expect
                }
                None => T::nan(),
            };
            knots.push(KnotFit { knot: j, order: n, r_exponent: slope, coefficient_error });
        }
    }
    Ok(AsymptoticsReport {
        y_exponent: mean,
        y_exponent_range: (lo, hi),
        coefficient_error: coef_err,
        knots,
        nahm_pole,
        samples: exps.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec, Grading, KnotPoint};
    use crate::higgs::Polynomial;
    use crate::model::closed_form::{eval_model_phi, un_value};
    use crate::solver::operator::scalar_residual;

    fn line(n: usize, y_max: f64) -> Arc<GradedGrid<f64>> {
        Arc::new(build_grid(&DomainSpec::ode_line(y_max), &[n], Grading::uniform().excluding_y0()).unwrap())
    }

    fn slab(n: usize, order: usize) -> Arc<GradedGrid<f64>> {
        let mut spec = DomainSpec::axisym_slab(2.0, 2.0, order);
        if order == 0 {
            spec.knots.clear();
        }
        Arc::new(build_grid(&spec, &[n, n - 1], Grading::uniform().excluding_y0()).unwrap())
    }

    fn field(g: &Arc<GradedGrid<f64>>, f: impl Fn(usize) -> f64) -> ScalarField<f64> {
        ScalarField::from_fn(g.clone(), f).unwrap()
    }

    fn u1_setup(n: usize) -> (Arc<GradedGrid<f64>>, HiggsData<f64>, HermitianMetric<f64>) {
        let g = slab(n, 1);
        let data = HiggsData::plane(Polynomial::real(&[0.0, 1.0]).unwrap(), vec![KnotPoint::at(0.0, 0.0, 1).unwrap()]).unwrap();
        let u = field(&g, |i| un_value(1, g.z(i).re, g.y(i)));
        let m = metric_from_scalar(&u, Background::from_data(&data, &g)).unwrap();
        (g, data, m)
    }

    #[test]
    fn metric_from_zero_is_background() {
        let g = line(9, 1.0);
        let mut bg = Background::flat(&g);
        bg.log_h0 = vec![0.7];
        let m = metric_from_scalar(&ScalarField::zeros(g.clone()), bg).unwrap();
        let h = m.at(3);
        assert!((h.m[0][0].re - 0.7f64.exp()).abs() < 1e-15);
        assert!((h.m[1][1].re - (-0.7f64).exp()).abs() < 1e-15);
        assert!((h.det().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_scalar_rejected() {
        let g = line(9, 1.0);
        let mut u = vec![0.0; g.len()];
        u[2] = f64::NAN;
        assert!(ScalarField::new(g.clone(), u).is_err());
        let mut bg = Background::flat(&g);
        bg.log_h0 = vec![f64::NAN];
        assert!(metric_from_scalar(&ScalarField::zeros(g.clone()), bg).is_err());
        let e = HermitianMetric::general(g.clone(), vec![1.0; 9], vec![Complex::new(2.0, 0.0); 9], vec![1.0; 9], Background::flat(&g));
        assert!(e.is_err());
    }

    #[test]
    fn nahm_pole_triplet() {
        let g = line(401, 4.0);
        let u = field(&g, |i| -g.y(i).ln());
        let m = metric_from_scalar(&u, Background::flat(&g)).unwrap();
        let t = unitary_triplet(&m, &HiggsField::nilpotent(&g)).unwrap();
        for i in 1..g.len() - 1 {
            let y = g.y(i);
            if y < 0.5 {
                continue;
            }
            assert!((t.phi_z.values[i].norm() - 1.0 / y).abs() < 1e-12);
            let p = t.phi1.values[i];
            assert!((p.m[0][0] - Complex::new(0.0, 0.5 / y)).norm() < 1e-3);
            assert!((p.m[1][1] - Complex::new(0.0, -0.5 / y)).norm() < 1e-3);
            assert!(t.a_y.values[i].norm() < 1e-14);
        }
        assert!(t.unitarity_defect() < 1e-10);
    }

    #[test]
    fn nahm_pole_residuals_are_second_order() {
        let mut errs = vec![];
        for n in [40, 80, 160] {
            let g = line(n, 4.0);
            let u = field(&g, |i| -g.y(i).ln());
            let m = metric_from_scalar(&u, Background::flat(&g)).unwrap();
            let t = unitary_triplet(&m, &HiggsField::nilpotent(&g)).unwrap();
            let r = ebe_residual(&t);
            let (a, b, c) = r.max_where(|i| g.y(i) >= 0.5 && g.y(i) <= 3.5);
            assert!(b < 1e-12);
            errs.push(a.max(c));
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.9, "{errs:?}");
    }

    #[test]
    fn model_triplet_matches_closed_form() {
        let (g, data, m) = u1_setup(65);
        let t = unitary_triplet(&m, &HiggsField::from_data(&data, &g).unwrap()).unwrap();
        for i in 0..g.len() {
            let (r, y) = (g.z(i).re, g.y(i));
            if r == 0.0 {
                continue;
            }
            let big_r = r.hypot(y);
            let (phi, _) = eval_model_phi(1, big_r, (y / r).atan()).unwrap();
            assert!((t.phi_z.values[i].norm() - phi).abs() < 1e-10 * (1.0 + phi));
        }
        assert!(t.unitarity_defect() < 1e-10);
    }

    #[test]
    fn model_triplet_phi1_converges() {
        let mut errs = vec![];
        for n in [65, 129, 257] {
            let (g, data, m) = u1_setup(n);
            let t = unitary_triplet(&m, &HiggsField::from_data(&data, &g).unwrap()).unwrap();
            let mut e: f64 = 0.0;
            for i in 0..g.len() {
                let (r, y) = (g.z(i).re, g.y(i));
                if r < 0.5 || y < 0.5 || !t.phi1.valid[i] {
                    continue;
                }
                let (_, p1) = eval_model_phi(1, r.hypot(y), (y / r).atan()).unwrap();
                e = e.max((t.phi1.values[i].m[0][0].im - p1).abs());
            }
            errs.push(e);
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.9, "{errs:?}");
    }

    #[test]
    fn u1_moment_residual_is_second_order() {
        let mut errs = vec![];
        for n in [65, 129, 257] {
            let (g, data, m) = u1_setup(n);
            let t = unitary_triplet(&m, &HiggsField::from_data(&data, &g).unwrap()).unwrap();
            let r = ebe_residual(&t);
            let (a, b, c) = r.max_where(|i| g.z(i).re >= 0.5 && g.y(i) >= 0.5);
            errs.push([a, b, c]);
        }
        for k in 0..3 {
            let order = (errs[0][k] / errs[2][k]).log2() / 2.0;
            assert!(order > 1.9, "{k}: {errs:?}");
        }
    }

    #[test]
    fn random_fields_have_large_residuals() {
        let g = slab(17, 1);
        let data = HiggsData::plane(Polynomial::real(&[0.0, 1.0]).unwrap(), vec![KnotPoint::at(0.0, 0.0, 1).unwrap()]).unwrap();
        let u = field(&g, |i| ((i * 7919) % 13) as f64 * 0.3);
        let m = metric_from_scalar(&u, Background::from_data(&data, &g)).unwrap();
        let t = unitary_triplet(&m, &HiggsField::from_data(&data, &g).unwrap()).unwrap();
        let (a, _, _) = ebe_residual(&t).max_where(|_| true);
        assert!(a > 1.0);
    }

    #[test]
    fn constant_u_scales_phi() {
        let g = line(9, 1.0);
        let u = field(&g, |_| 0.3);
        let t = unitary_triplet(&metric_from_scalar(&u, Background::flat(&g)).unwrap(), &HiggsField::nilpotent(&g)).unwrap();
        for i in 1..g.len() - 1 {
            assert!(t.a_z.values[i].norm() == 0.0);
            assert!((t.phi_z.values[i].m[0][1].re - 0.3f64.exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn trace_part_unsupported() {
        let g = line(9, 1.0);
        let m = metric_from_scalar(&ScalarField::zeros(g.clone()), Background::flat(&g)).unwrap();
        let e = unitary_triplet(&m, &HiggsField::nilpotent(&g).with_trace(Complex::new(0.1, 0.0))).unwrap_err();
        assert!(matches!(e, Error::UnsupportedData(_)));
    }

    #[test]
    fn diagonal_residual_matches_scalar() {
        let (g, data, _) = u1_setup(33);
        let u = field(&g, |i| un_value(1, g.z(i).re, g.y(i)) + 0.1 * (g.z(i).re * g.y(i)).sin());
        let m = metric_from_scalar(&u, Background::from_data(&data, &g)).unwrap();
        let hr = hermitian_residual(&m, &HiggsField::from_data(&data, &g).unwrap()).unwrap();
        let sr = scalar_residual(&u, &data).unwrap();
        let mut count = 0;
        for i in 0..g.len() {
            assert_eq!(hr.values[i].is_some(), sr[i].is_some());
            if let (Some(a), Some(b)) = (hr.values[i], sr[i]) {
                assert!((a.m[0][0].re - b).abs() <= 1e-10 * (1.0 + b.abs()));
                assert!((a.m[1][1].re + b).abs() <= 1e-10 * (1.0 + b.abs()));
                count += 1;
            }
        }
        assert!(count > 100);

        let spec = DomainSpec::torus_half_cylinder(1.0, 1.0, 2.0);
        let g = Arc::new(build_grid(&spec, &[8, 8, 16], Grading::default().excluding_y0()).unwrap());
        let nh = g.horizontal_len();
        let mut data = HiggsData::constant(-1.0, 1.0, 0.5);
        data.curvature = Coefficient::Nodal((0..nh).map(|h| -1.0 + 0.2 * (h as f64).sin()).collect());
        data.alpha = AlphaSource::Field(Coefficient::Nodal((0..nh).map(|h| 1.0 + 0.5 * (h as f64).cos()).collect()));
        let u = field(&g, |i| -g.y(i).ln() + 0.3 * g.z(i).re);
        let m = metric_from_scalar(&u, Background::from_data(&data, &g)).unwrap();
        let hr = hermitian_residual(&m, &HiggsField::from_data(&data, &g).unwrap()).unwrap();
        let sr = scalar_residual(&u, &data).unwrap();
        for i in 0..g.len() {
            if let (Some(a), Some(b)) = (hr.values[i], sr[i]) {
                assert!((a.m[0][0].re - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn identity_metric_residuals() {
        let spec = DomainSpec::torus_half_cylinder(1.0, 1.0, 1.0);
        let g = Arc::new(build_grid(&spec, &[8, 8, 8], Grading::uniform()).unwrap());
        let n = g.len();
        let id = HermitianMetric::general(g.clone(), vec![1.0; n], vec![Complex::new(0.0, 0.0); n], vec![1.0; n], Background::flat(&g)).unwrap();
        let zero = HiggsField::nilpotent(&g);
        let zero = HiggsField { alpha: vec![Complex::new(0.0, 0.0); zero.alpha.len()], ..zero };
        let r = hermitian_residual(&id, &zero).unwrap();
        assert!(r.norms().iter().flatten().all(|v| *v < 1e-12));
        let r = hermitian_residual(&id, &HiggsField::nilpotent(&g)).unwrap();
        for m in r.values.iter().flatten() {
            assert!((*m - Mat2::sigma3()).norm() < 1e-12);
        }
    }

    #[test]
    fn general_path_agrees_with_diagonal() {
        let mut diffs = vec![];
        for n in [17, 33, 65] {
            let (g, data, _) = u1_setup(n);
            let u = field(&g, |i| un_value(1, g.z(i).re, g.y(i)));
            let d = metric_from_scalar(&u, Background::from_data(&data, &g)).unwrap();
            let gen = HermitianMetric::general(
                g.clone(),
                u.values().iter().map(|v| v.exp()).collect(),
                vec![Complex::new(0.0, 0.0); g.len()],
                u.values().iter().map(|v| (-v).exp()).collect(),
                Background::from_data(&data, &g),
            )
            .unwrap();
            let phi = HiggsField::from_data(&data, &g).unwrap();
            let a = hermitian_residual(&d, &phi).unwrap();
            let b = hermitian_residual(&gen, &phi).unwrap();
            let mut e: f64 = 0.0;
            for i in 0..g.len() {
                if g.z(i).re < 0.5 || g.y(i) < 0.5 {
                    continue;
                }
                if let (Some(x), Some(y)) = (a.values[i], b.values[i]) {
                    e = e.max((x.m[0][0] - y.m[0][0]).norm());
                }
            }
            diffs.push(e);
        }
        assert!(diffs[2] < diffs[0] / 10.0, "{diffs:?}");
    }

    #[test]
    fn sigma_values() {
        let g = line(9, 1.0);
        let a = metric_from_scalar(&field(&g, |i| g.y(i)), Background::flat(&g)).unwrap();
        let b = metric_from_scalar(&field(&g, |i| g.y(i) + 0.1), Background::flat(&g)).unwrap();
        let s = sigma_distance(&a, &a).unwrap();
        assert!(s.values().iter().all(|v| *v == 0.0));
        let s = sigma_distance(&a, &b).unwrap();
        for v in s.values() {
            assert!((v - 4.0 * (0.1f64.cosh() - 1.0)).abs() < 1e-15);
            assert!((v - 0.0200167).abs() < 1e-7);
        }
        let gen = |m: &HermitianMetric<f64>| {
            let n = g.len();
            HermitianMetric::general(
                g.clone(),
                (0..n).map(|i| m.h11(i)).collect(),
                vec![Complex::new(0.0, 0.0); n],
                (0..n).map(|i| m.h11(i).recip()).collect(),
                Background::flat(&g),
            )
            .unwrap()
        };
        let s2 = sigma_distance(&gen(&a), &gen(&b)).unwrap();
        for (x, y) in s.values().iter().zip(s2.values()) {
            assert!((x - y).abs() < 1e-14);
        }
        let other = line(11, 1.0);
        let c = metric_from_scalar(&ScalarField::zeros(other.clone()), Background::flat(&other)).unwrap();
        assert!(sigma_distance(&a, &c).is_err());
    }

    #[test]
    fn subharmonic_reports() {
        let g = slab(17, 0);
        let a = metric_from_scalar(&field(&g, |i| -g.y(i).ln()), Background::flat(&g)).unwrap();
        let s = sigma_distance(&a, &a).unwrap();
        let rep = check_subharmonic(&s, &Coefficient::Constant(1.0), 1e-12);
        assert_eq!(rep.min, 0.0);
        assert!(rep.violations.is_empty());
        let b = metric_from_scalar(&field(&g, |i| ((i * 7919) % 13) as f64 * 0.3), Background::flat(&g)).unwrap();
        let s = sigma_distance(&a, &b).unwrap();
        let rep = check_subharmonic(&s, &Coefficient::Constant(1.0), 1e-12);
        assert!(!rep.violations.is_empty() && rep.min < 0.0);
    }

    #[test]
    fn asymptotics_of_models() {
        let g = line(400, 4.0);
        let data = HiggsData::constant(0.0, 1.0, 0.0);
        let m = metric_from_scalar(&field(&g, |i| -g.y(i).ln()), Background::flat(&g)).unwrap();
        let rep = boundary_asymptotics_check(&m, &data).unwrap();
        assert!((rep.y_exponent + 1.0).abs() < 0.02 && rep.nahm_pole);
        assert!(rep.coefficient_error < 1e-12);

        let m = metric_from_scalar(&ScalarField::zeros(g.clone()), Background::flat(&g)).unwrap();
        let rep = boundary_asymptotics_check(&m, &data).unwrap();
        assert!(rep.y_exponent.abs() < 1e-12 && !rep.nahm_pole);

        let (_, data, m) = u1_setup(129);
        let rep = boundary_asymptotics_check(&m, &data).unwrap();
        assert!((rep.y_exponent + 1.0).abs() < 0.02, "{rep:?}");
        let k = &rep.knots[0];
        assert!((k.r_exponent + 1.0).abs() < 0.02, "{rep:?}");
        assert!(k.coefficient_error < 0.02, "{rep:?}");
    }
}

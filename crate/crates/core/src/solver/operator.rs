//! Finite-volume discretisation of `-(Δ_{g0} + ∂_y²)` on graded grids and the
//! assembled semilinear problem `N̂(v) = L v + c₊(e^{2v} - 1) + c₋(1 - e^{-2v}) + f`.

use std::sync::Arc;

use crate::domain::{Axis, AxisRole, GradedGrid, NodeClass, ScalarField};
use crate::error::{Error, Result};
use crate::higgs::{Coefficient, HiggsData};
use crate::model::approx::ApproximateSolution;
use crate::scalar::Real;

/// One-dimensional vertex-centred finite-volume coefficients of an axis.
///
/// `(A u)_k = (left_k (u_k - u_{k-1}) + right_k (u_k - u_{k+1})) / weight_k`
/// discretises `-∂²` (or `-(1/r)∂_r(r ∂_r)` on a radial axis).
#[derive(Clone, Debug)]
pub struct AxisStencil<T> {
    pub weight: Vec<T>,
    pub left: Vec<T>,
    pub right: Vec<T>,
    pub periodic: bool,
    /// Ends where the stencil lacks a neighbour (`[low, high]`).
    pub open: [bool; 2],
}

impl<T: Real> AxisStencil<T> {
    pub fn new(axis: &Axis<T>) -> Self {
        let n = axis.len();
        let x = &axis.nodes;
        let half = T::lit(0.5);
        if let Some(p) = axis.period() {
            let h = p / T::of(n);
            return Self {
                weight: vec![h; n],
                left: vec![h.recip(); n],
                right: vec![h.recip(); n],
                periodic: true,
                open: [false, false],
            };
        }
        let radial = axis.role == AxisRole::Radial;
        let mut weight = vec![T::zero(); n];
        let mut left = vec![T::zero(); n];
        let mut right = vec![T::zero(); n];
        for k in 0..n {
            let hl = if k > 0 { x[k] - x[k - 1] } else { T::zero() };
            let hr = if k + 1 < n { x[k + 1] - x[k] } else { T::zero() };
            if radial {
                if k == 0 {
                    weight[0] = hr * hr / T::lit(8.0);
                } else {
                    // ∫ r dr over the dual cell
                    let a = x[k] - half * hl;
                    let b = if k + 1 < n { x[k] + half * hr } else { x[k] };
                    weight[k] = half * (b * b - a * a);
                }
                if k > 0 {
                    left[k] = (x[k] - half * hl) / hl;
                }
                if k + 1 < n {
                    right[k] = (x[k] + half * hr) / hr;
                }
            } else {
                weight[k] = half * (hl + hr);
                if k > 0 {
                    left[k] = hl.recip();
                }
                if k + 1 < n {
                    right[k] = hr.recip();
                }
            }
        }
        Self { weight, left, right, periodic: false, open: [!radial, true] }
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// Whether the full stencil exists at position `k`.
    pub fn complete_at(&self, k: usize) -> bool {
        self.periodic || ((k > 0 || !self.open[0]) && (k + 1 < self.len() || !self.open[1]))
    }
}

const NONE: usize = usize::MAX;

/// Discrete `-(Δ_{g0} + ∂_y²)` with neighbour lists precomputed per node.
#[derive(Clone, Debug)]
pub struct Laplacian<T> {
    pub stencils: Vec<AxisStencil<T>>,
    /// `1 / g0²` per horizontal node.
    pub h_scale: Vec<T>,
    /// `g0²` times the product of control-volume weights; the operator is
    /// symmetric in the inner product weighted by these values.
    pub sym_weight: Vec<T>,
    pub diag: Vec<T>,
    neighbours: Vec<[usize; 6]>,
    coeffs: Vec<[T; 6]>,
    complete: Vec<bool>,
}

impl<T: Real> Laplacian<T> {
    pub fn new(grid: &GradedGrid<T>, g0_sq: &Coefficient<T>) -> Self {
        let stencils: Vec<AxisStencil<T>> = grid.axes.iter().map(AxisStencil::new).collect();
        let nh = grid.horizontal_len();
        let h_scale: Vec<T> = (0..nh).map(|h| g0_sq.at(h).recip()).collect();
        let vertical = grid.vertical_axis();
        let strides = grid.strides().to_vec();
        let n = grid.len();
        let mut diag = vec![T::zero(); n];
        let mut neighbours = vec![[NONE; 6]; n];
        let mut coeffs = vec![[T::zero(); 6]; n];
        let mut complete = vec![true; n];
        let mut sym_weight = vec![T::zero(); n];
        for i in 0..n {
            let m = grid.unravel(i);
            let h = grid.horizontal_index(i);
            let mut w = T::one();
            for (a, st) in stencils.iter().enumerate() {
                let scale = if Some(a) == vertical { T::one() } else { h_scale[h] };
                let k = m[a];
                let len = st.len();
                w = w * st.weight[k];
                if !st.complete_at(k) {
                    complete[i] = false;
                }
                let lw = scale * st.left[k] / st.weight[k];
                let rw = scale * st.right[k] / st.weight[k];
                let left = if k > 0 {
                    Some(i - strides[a])
                } else if st.periodic {
                    Some(i + (len - 1) * strides[a])
                } else {
                    None
                };
                let right = if k + 1 < len {
                    Some(i + strides[a])
                } else if st.periodic {
                    Some(i - (len - 1) * strides[a])
                } else {
                    None
                };
                if let Some(j) = left {
                    diag[i] = diag[i] + lw;
                    neighbours[i][2 * a] = j;
                    coeffs[i][2 * a] = lw;
                }
                if let Some(j) = right {
                    diag[i] = diag[i] + rw;
                    neighbours[i][2 * a + 1] = j;
                    coeffs[i][2 * a + 1] = rw;
                }
            }
            sym_weight[i] = w / h_scale[h];
        }
        Self { stencils, h_scale, sym_weight, diag, neighbours, coeffs, complete }
    }

    /// Whether every axis has its full stencil at node `i`.
    pub fn complete_at(&self, i: usize) -> bool {
        self.complete[i]
    }

    /// `(L v)_i`.
    #[inline]
    pub fn apply_at(&self, v: &[T], i: usize) -> T {
        let mut acc = self.diag[i] * v[i];
        let nb = &self.neighbours[i];
        let c = &self.coeffs[i];
        for k in 0..6 {
            if nb[k] != NONE {
                acc = acc - c[k] * v[nb[k]];
            }
        }
        acc
    }

    /// `(L v)_i` where `v` is zero on masked nodes.
    #[inline]
    pub fn apply_masked_at(&self, v: &[T], fixed: &[bool], i: usize) -> T {
        let mut acc = self.diag[i] * v[i];
        let nb = &self.neighbours[i];
        let c = &self.coeffs[i];
        for k in 0..6 {
            let j = nb[k];
            if j != NONE && !fixed[j] {
                acc = acc - c[k] * v[j];
            }
        }
        acc
    }
}

/// `Δ_{g0} f` (analyst's sign) of a horizontal nodal field on the
/// horizontal factor of `grid`. Nodes lacking a full stencil get 0.
pub fn horizontal_laplacian<T: Real>(grid: &GradedGrid<T>, g0_sq: &Coefficient<T>, values: &[T]) -> Vec<T> {
    let nh = grid.horizontal_len();
    let axes: Vec<AxisStencil<T>> = grid.horizontal_axes().map(|a| AxisStencil::new(&grid.axes[a])).collect();
    if axes.is_empty() {
        return vec![T::zero(); nh];
    }
    let lens: Vec<usize> = axes.iter().map(AxisStencil::len).collect();
    let mut strides = vec![1; lens.len()];
    for a in (0..lens.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * lens[a + 1];
    }
    (0..nh)
        .map(|h| {
            let mut acc = T::zero();
            let mut rem = h;
            for (a, st) in axes.iter().enumerate() {
                let k = rem / strides[a];
                rem %= strides[a];
                if !st.complete_at(k) {
                    return T::zero();
                }
                let len = lens[a];
                let l = if k > 0 { h - strides[a] } else { h + (len - 1) * strides[a] };
                let r = if k + 1 < len { h + strides[a] } else { h - (len - 1) * strides[a] };
                let lv = if k > 0 || st.periodic { values[l] } else { values[h] };
                let rv = if k + 1 < len || st.periodic { values[r] } else { values[h] };
                acc = acc + (st.left[k] * (lv - values[h]) + st.right[k] * (rv - values[h])) / st.weight[k];
            }
            acc / g0_sq.at(h)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Surface,
    Cylinder,
    Plane,
    Axisym,
}

/// Fully assembled discrete problem for the remainder `v`.
#[derive(Clone, Debug)]
pub struct SemilinearProblem<T> {
    pub grid: Arc<GradedGrid<T>>,
    pub mode: Mode,
    pub lap: Laplacian<T>,
    pub c_plus: Vec<T>,
    pub c_minus: Vec<T>,
    pub f: Vec<T>,
    /// Dirichlet nodes and their values.
    pub fixed: Vec<bool>,
    pub boundary: Vec<T>,
    /// Approximate solution `û` (infinite on the `y = 0` face); empty for
    /// surface problems, where the unknown is the solution itself.
    pub uhat: Vec<T>,
}

impl<T: Real> SemilinearProblem<T> {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// Pointwise nonlinearity `c₊(e^{2v} - 1) + c₋(1 - e^{-2v}) + f`.
    #[inline]
    pub fn nonlinear_at(&self, i: usize, v: T) -> T {
        let two = T::lit(2.0);
        let mut acc = self.f[i];
        if self.c_plus[i] != T::zero() {
            acc = acc + self.c_plus[i] * (two * v).exp_m1();
        }
        if self.c_minus[i] != T::zero() {
            acc = acc - self.c_minus[i] * (-two * v).exp_m1();
        }
        acc
    }

    /// `∂_v` of the nonlinearity.
    #[inline]
    pub fn nonlinear_derivative_at(&self, i: usize, v: T) -> T {
        let two = T::lit(2.0);
        two * (self.c_plus[i] * (two * v).exp() + self.c_minus[i] * (-two * v).exp())
    }

    /// `N̂(v)` at free nodes and `v - data` at Dirichlet nodes.
    pub fn residual(&self, v: &[T]) -> Vec<T> {
        (0..self.len())
            .map(|i| {
                if self.fixed[i] {
                    v[i] - self.boundary[i]
                } else {
                    self.lap.apply_at(v, i) + self.nonlinear_at(i, v[i])
                }
            })
            .collect()
    }

    /// Residual divided by the diagonal of the Jacobian, a step-size
    /// measure independent of the local mesh width.
    pub fn scaled_residual(&self, v: &[T]) -> Vec<T> {
        let r = self.residual(v);
        r.iter()
            .enumerate()
            .map(|(i, &ri)| {
                if self.fixed[i] {
                    ri
                } else {
                    ri / (self.lap.diag[i] + self.nonlinear_derivative_at(i, v[i]))
                }
            })
            .collect()
    }

    /// Vector with boundary data on Dirichlet nodes and `fill` elsewhere.
    pub fn with_boundary(&self, fill: T) -> Vec<T> {
        (0..self.len()).map(|i| if self.fixed[i] { self.boundary[i] } else { fill }).collect()
    }

    /// `u = û + v` on the grid without its `y = 0` layer.
    pub fn reconstruct(&self, v: &[T]) -> Result<ScalarField<T>> {
        if self.uhat.is_empty() {
            return ScalarField::new(self.grid.clone(), v.to_vec());
        }
        let sub = Arc::new(self.grid.without_bottom()?);
        let skip = self.grid.includes_y0();
        let values = (0..self.len())
            .filter(|&i| !(skip && self.grid.vertical_index(i) == 0))
            .map(|i| self.uhat[i] + v[i])
            .collect();
        ScalarField::new(sub, values)
    }
}

/// Assembles the problem for the remainder `v = u - û`.
///
/// Dirichlet data: `v = 0` on `y = 0`; the far-field or limiting data
/// carried by `approx` on top and lateral faces.
pub fn assemble_problem<T: Real>(
    grid: Arc<GradedGrid<T>>,
    data: &HiggsData<T>,
    approx: &ApproximateSolution<T>,
    mode: Mode,
) -> Result<SemilinearProblem<T>> {
    data.validate_for(&grid)?;
    if !grid.includes_y0() {
        return Err(Error::invalid("the remainder problem needs a grid that includes y = 0"));
    }
    let expected = match grid.kind {
        crate::domain::DomainKind::AxisymSlab => Mode::Axisym,
        crate::domain::DomainKind::PlaneHalfSpace => Mode::Plane,
        crate::domain::DomainKind::LimitSurface => Mode::Surface,
        _ => Mode::Cylinder,
    };
    if mode != expected {
        return Err(Error::invalid(format!("mode {mode:?} does not match a {} grid", grid.kind.name())));
    }
    let n = grid.len();
    let lap = Laplacian::new(&grid, &data.g0_sq);
    let mut fixed = vec![false; n];
    let mut boundary = vec![T::zero(); n];
    for i in 0..n {
        match grid.classify(i) {
            NodeClass::Interior => {}
            NodeClass::Bottom => fixed[i] = true,
            NodeClass::Top | NodeClass::Lateral => {
                fixed[i] = true;
                boundary[i] = approx.boundary_value(i);
            }
        }
    }
    let mut c_plus = approx.c_plus.clone();
    let mut c_minus = approx.c_minus.clone();
    let mut f = approx.f.clone();
    for i in 0..n {
        if fixed[i] {
            c_plus[i] = T::zero();
            c_minus[i] = T::zero();
            f[i] = T::zero();
        } else if !(c_plus[i].is_finite() && c_minus[i].is_finite() && f[i].is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient at node {i}")));
        }
        if !boundary[i].is_finite() {
            return Err(Error::invalid(format!("non-finite boundary data at node {i}")));
        }
    }
    Ok(SemilinearProblem { grid, mode, lap, c_plus, c_minus, f, fixed, boundary, uhat: approx.uhat.clone() })
}

/// Assembles the limiting surface equation
/// `K - Δ_{g0} w + |α|² e^{2w} - |β|² e^{-2w} = 0` for `w` itself.
pub fn assemble_surface<T: Real>(grid: Arc<GradedGrid<T>>, data: &HiggsData<T>) -> Result<SemilinearProblem<T>> {
    data.validate_for(&grid)?;
    if grid.vertical_axis().is_some() {
        return Err(Error::invalid("surface problems live on a grid without a vertical axis"));
    }
    let n = grid.len();
    let lap = Laplacian::new(&grid, &data.g0_sq);
    let c_plus: Vec<T> = (0..n).map(|h| data.alpha_sq(h, grid.z_of_horizontal(h))).collect();
    let c_minus: Vec<T> = (0..n).map(|h| data.beta_sq.at(h)).collect();
    let f = (0..n).map(|h| data.curvature.at(h) + c_plus[h] - c_minus[h]).collect();
    Ok(SemilinearProblem {
        grid,
        mode: Mode::Surface,
        lap,
        c_plus,
        c_minus,
        f,
        fixed: vec![false; n],
        boundary: vec![T::zero(); n],
        uhat: vec![],
    })
}

/// Discrete residual `K - (Δ_{g0} + ∂_y²) u + |α|² e^{2u} - |β|² e^{-2u}` of a
/// full solution `u`, with the solver's stencil. `None` at boundary nodes,
/// where the stencil is incomplete, and where it touches non-finite values.
pub fn scalar_residual<T: Real>(u: &ScalarField<T>, data: &HiggsData<T>) -> Result<Vec<Option<T>>> {
    let grid = u.grid();
    data.validate_for(grid)?;
    let lap = Laplacian::new(grid, &data.g0_sq);
    let v = u.values();
    let two = T::lit(2.0);
    Ok((0..grid.len())
        .map(|i| {
            if grid.classify(i) != NodeClass::Interior || !lap.complete_at(i) {
                return None;
            }
            let h = grid.horizontal_index(i);
            let a = data.alpha_sq(h, grid.z(i));
            let r = data.curvature.at(h) + lap.apply_at(v, i) + a * (two * v[i]).exp()
                - data.beta_sq.at(h) * (-two * v[i]).exp();
            r.is_finite().then_some(r)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec, Grading};

    #[test]
    fn periodic_laplacian_of_fourier_mode() {
        let spec = DomainSpec::limit_surface(1.0f64, 2.0);
        let g = build_grid(&spec, &[32, 16], Grading::uniform()).unwrap();
        let lap = Laplacian::new(&g, &Coefficient::Constant(1.0));
        let two_pi = 2.0 * std::f64::consts::PI;
        let v: Vec<f64> = (0..g.len()).map(|i| (two_pi * g.z(i).re).cos()).collect();
        let h = 1.0 / 32.0;
        let eig = 4.0 / (h * h) * (std::f64::consts::PI * h).sin().powi(2);
        for i in 0..g.len() {
            assert!((lap.apply_at(&v, i) - eig * v[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn radial_operator_is_second_order_on_quadratics() {
        // -(1/r)(r u')' for u = r² equals -4, including the axis node
        let g = build_grid(&DomainSpec::axisym_slab(1.0f64, 1.0, 1), &[17, 9], Grading::uniform()).unwrap();
        let lap = Laplacian::new(&g, &Coefficient::Constant(1.0));
        let v: Vec<f64> = (0..g.len()).map(|i| g.z(i).re.powi(2)).collect();
        for i in 0..g.len() {
            let m = g.unravel(i);
            if m[0] < 16 && m[1] > 0 && m[1] < 8 {
                assert!((lap.apply_at(&v, i) + 4.0).abs() < 1e-9, "node {m:?}");
            }
        }
    }

    #[test]
    fn operator_is_symmetric_in_weighted_product() {
        let spec = DomainSpec::torus_half_cylinder(1.0f64, 1.0, 2.0);
        let g = build_grid(&spec, &[8, 8, 10], Grading::default()).unwrap();
        let g0: Vec<f64> = (0..64).map(|h| 1.0 + 0.3 * (h as f64).sin().powi(2)).collect();
        let lap = Laplacian::new(&g, &Coefficient::Nodal(g0));
        let fixed: Vec<bool> = (0..g.len()).map(|i| g.classify(i) != NodeClass::Interior).collect();
        let x: Vec<f64> = (0..g.len()).map(|i| if fixed[i] { 0.0 } else { (i as f64 * 0.37).sin() }).collect();
        let y: Vec<f64> = (0..g.len()).map(|i| if fixed[i] { 0.0 } else { (i as f64 * 0.11).cos() }).collect();
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..g.len() {
            if !fixed[i] {
                a += lap.sym_weight[i] * y[i] * lap.apply_masked_at(&x, &fixed, i);
                b += lap.sym_weight[i] * x[i] * lap.apply_masked_at(&y, &fixed, i);
            }
        }
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn horizontal_laplacian_of_constant_is_zero() {
        let spec = DomainSpec::torus_half_cylinder(1.0f64, 1.0, 2.0);
        let g = build_grid(&spec, &[8, 8, 8], Grading::default()).unwrap();
        let l = horizontal_laplacian(&g, &Coefficient::Constant(2.0), &vec![3.0; 64]);
        assert!(l.iter().all(|v| v.abs() < 1e-12));
    }
}

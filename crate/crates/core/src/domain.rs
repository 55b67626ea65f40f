//! Computational domains, graded tensor-product grids and nodal fields.
//!
//! Every grid is a tensor product of one-dimensional axes. Nodes are stored
//! row-major with the last axis varying fastest; when a domain has a
//! vertical direction it is always the last axis. Grading toward `y = 0`
//! (and toward the symmetry axis `r = 0`) uses the power map
//! `x(t) = lo + len * t^gamma` on a uniform computational variable `t`.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest node count accepted on any axis.
pub const MIN_AXIS_NODES: usize = 8;

/// Marked boundary point carrying a knot singularity of the given order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnotPoint<T> {
    pub position: Complex<T>,
    pub order: usize,
}

impl<T: Real> KnotPoint<T> {
    pub fn new(position: Complex<T>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("knot order must be a positive integer"));
        }
        if !position.re.is_finite() || !position.im.is_finite() {
            return Err(Error::invalid("knot position must be finite"));
        }
        Ok(Self { position, order })
    }

    pub fn at(x: f64, y: f64, order: usize) -> Result<Self> {
        Self::new(Complex::new(T::lit(x), T::lit(y)), order)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainKind {
    /// `y`-only problems on `[0, y_max]`.
    OdeLine,
    /// Doubly periodic surface (no vertical direction).
    LimitSurface,
    /// Axisymmetric `(r, y)` slab around a single knot.
    AxisymSlab,
    /// Periodic torus times `[0, y_max]`.
    TorusHalfCylinder,
    /// Box `[-L, L]^2 x [0, y_max]` in the half space.
    PlaneHalfSpace,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::OdeLine => "ode-line",
            DomainKind::LimitSurface => "limit-surface",
            DomainKind::AxisymSlab => "axisym-slab",
            DomainKind::TorusHalfCylinder => "torus-half-cylinder",
            DomainKind::PlaneHalfSpace => "plane-half-space",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ode-line" => DomainKind::OdeLine,
            "limit-surface" => DomainKind::LimitSurface,
            "axisym-slab" => DomainKind::AxisymSlab,
            "torus-half-cylinder" => DomainKind::TorusHalfCylinder,
            "plane-half-space" => DomainKind::PlaneHalfSpace,
            _ => return None,
        })
    }

    pub fn axis_count(self) -> usize {
        match self {
            DomainKind::OdeLine => 1,
            DomainKind::LimitSurface | DomainKind::AxisymSlab => 2,
            DomainKind::TorusHalfCylinder | DomainKind::PlaneHalfSpace => 3,
        }
    }

    pub fn has_vertical(self) -> bool {
        !matches!(self, DomainKind::LimitSurface)
    }
}

/// Geometric description of a computational domain.
///
/// `extents` holds the periods for periodic directions, the half width `L`
/// of the plane box, or the radial extent of the axisymmetric slab.
#[derive(Clone, Debug)]
pub struct DomainSpec<T> {
    pub kind: DomainKind,
    pub extents: Vec<T>,
    pub y_max: T,
    pub knots: Vec<KnotPoint<T>>,
    pub far_field_degree: Option<usize>,
}

impl<T: Real> DomainSpec<T> {
    pub fn ode_line(y_max: T) -> Self {
        Self { kind: DomainKind::OdeLine, extents: vec![], y_max, knots: vec![], far_field_degree: None }
    }

    pub fn limit_surface(p1: T, p2: T) -> Self {
        Self {
            kind: DomainKind::LimitSurface,
            extents: vec![p1, p2],
            y_max: T::one(),
            knots: vec![],
            far_field_degree: None,
        }
    }

    pub fn torus_half_cylinder(p1: T, p2: T, y_max: T) -> Self {
        Self {
            kind: DomainKind::TorusHalfCylinder,
            extents: vec![p1, p2],
            y_max,
            knots: vec![],
            far_field_degree: None,
        }
    }

    pub fn axisym_slab(r_max: T, y_max: T, order: usize) -> Self {
        Self {
            kind: DomainKind::AxisymSlab,
            extents: vec![r_max],
            y_max,
            knots: vec![KnotPoint { position: Complex::new(T::zero(), T::zero()), order }],
            far_field_degree: Some(order),
        }
    }

    pub fn plane_half_space(half_width: T, y_max: T, knots: Vec<KnotPoint<T>>) -> Self {
        let degree = knots.iter().map(|k| k.order).sum();
        Self {
            kind: DomainKind::PlaneHalfSpace,
            extents: vec![half_width],
            y_max,
            knots,
            far_field_degree: Some(degree),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y_max > T::zero()) {
            return Err(Error::invalid("y_max must be positive"));
        }
        let need = match self.kind {
            DomainKind::OdeLine => 0,
            DomainKind::LimitSurface | DomainKind::TorusHalfCylinder => 2,
            DomainKind::AxisymSlab | DomainKind::PlaneHalfSpace => 1,
        };
        if self.extents.len() != need {
            return Err(Error::invalid(format!(
                "{} needs {need} extent(s), got {}",
                self.kind.name(),
                self.extents.len()
            )));
        }
        if self.extents.iter().any(|&e| !(e > T::zero())) {
            return Err(Error::invalid("domain extents must be positive"));
        }
        for (i, a) in self.knots.iter().enumerate() {
            if a.order == 0 {
                return Err(Error::invalid("knot order must be a positive integer"));
            }
            for b in &self.knots[i + 1..] {
                if a.position == b.position {
                    return Err(Error::invalid("knot positions must be pairwise distinct"));
                }
            }
            let inside = match self.kind {
                DomainKind::OdeLine | DomainKind::LimitSurface => false,
                DomainKind::AxisymSlab => a.position.norm() == T::zero(),
                DomainKind::TorusHalfCylinder => {
                    a.position.re > T::zero()
                        && a.position.re < self.extents[0]
                        && a.position.im > T::zero()
                        && a.position.im < self.extents[1]
                }
                DomainKind::PlaneHalfSpace => {
                    a.position.re.abs() < self.extents[0] && a.position.im.abs() < self.extents[0]
                }
            };
            if !inside {
                return Err(Error::invalid(format!(
                    "knot at ({}, {}) lies outside the horizontal domain",
                    a.position.re, a.position.im
                )));
            }
        }
        if self.kind == DomainKind::AxisymSlab && self.knots.len() > 1 {
            return Err(Error::invalid("axisymmetric slab supports a single knot on the axis"));
        }
        if self.kind == DomainKind::PlaneHalfSpace {
            let total: usize = self.knots.iter().map(|k| k.order).sum();
            if self.far_field_degree != Some(total) {
                return Err(Error::invalid("far-field degree must equal the sum of knot orders"));
            }
        }
        Ok(())
    }
}

/// Grading parameters for [`build_grid`].
#[derive(Clone, Copy, Debug)]
pub struct Grading<T> {
    /// Power-law stretch exponent toward `y = 0`.
    pub y_exponent: T,
    /// Stretch exponent toward the symmetry axis (axisymmetric slabs only).
    pub radial_exponent: T,
    /// Whether the `y = 0` layer is part of the grid.
    pub include_y0: bool,
}

impl<T: Real> Default for Grading<T> {
    fn default() -> Self {
        Self { y_exponent: T::lit(2.0), radial_exponent: T::one(), include_y0: true }
    }
}

impl<T: Real> Grading<T> {
    pub fn uniform() -> Self {
        Self { y_exponent: T::one(), radial_exponent: T::one(), include_y0: true }
    }

    pub fn with_y_exponent(mut self, e: T) -> Self {
        self.y_exponent = e;
        self
    }

    pub fn excluding_y0(mut self) -> Self {
        self.include_y0 = false;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisRole {
    Horizontal,
    Radial,
    Vertical,
}

/// Stretch map from the uniform computational variable to physical nodes.
#[derive(Clone, Copy, Debug)]
pub enum AxisMap<T> {
    /// `x = lo + len * t^exponent` for `t` in `[0, 1]`.
    Power { lo: T, len: T, exponent: T },
    /// Uniform periodic nodes `x = period * t`, `t` in `[0, 1)`.
    Periodic { period: T },
}

impl<T: Real> AxisMap<T> {
    pub fn forward(&self, t: T) -> T {
        match *self {
            AxisMap::Power { lo, len, exponent } => lo + len * t.powf(exponent),
            AxisMap::Periodic { period } => period * t,
        }
    }

    pub fn inverse(&self, x: T) -> T {
        match *self {
            AxisMap::Power { lo, len, exponent } => ((x - lo) / len).max(T::zero()).powf(exponent.recip()),
            AxisMap::Periodic { period } => x / period,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Axis<T> {
    pub role: AxisRole,
    pub map: AxisMap<T>,
    /// Computational coordinates of the nodes.
    pub params: Vec<T>,
    pub nodes: Vec<T>,
}

impl<T: Real> Axis<T> {
    fn power(role: AxisRole, lo: T, len: T, exponent: T, params: Vec<T>) -> Self {
        let map = AxisMap::Power { lo, len, exponent };
        let nodes = params.iter().map(|&t| map.forward(t)).collect();
        Self { role, map, params, nodes }
    }

    fn periodic(period: T, n: usize) -> Self {
        let map = AxisMap::Periodic { period };
        let params: Vec<T> = (0..n).map(|i| T::of(i) / T::of(n)).collect();
        let nodes = params.iter().map(|&t| map.forward(t)).collect();
        Self { role: AxisRole::Horizontal, map, params, nodes }
    }

    /// Axis through prescribed nodes with a linear map; periodic when
    /// `period` is given.
    pub fn from_nodes(role: AxisRole, nodes: Vec<T>, period: Option<T>) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("axis nodes must be finite and strictly increasing"));
        }
        let n = nodes.len();
        if let Some(p) = period {
            if !(p > nodes[n - 1] - nodes[0]) {
                return Err(Error::invalid("period must exceed the node span"));
            }
            let map = AxisMap::Periodic { period: p };
            let params = nodes.iter().map(|&x| x / p).collect();
            return Ok(Self { role, map, params, nodes });
        }
        let (lo, len) = (nodes[0], nodes[n - 1] - nodes[0]);
        let map = AxisMap::Power { lo, len, exponent: T::one() };
        let params = nodes.iter().map(|&x| (x - lo) / len).collect();
        Ok(Self { role, map, params, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.map, AxisMap::Periodic { .. })
    }

    pub fn period(&self) -> Option<T> {
        match self.map {
            AxisMap::Periodic { period } => Some(period),
            _ => None,
        }
    }

    /// Largest spacing between consecutive nodes.
    pub fn max_spacing(&self) -> T {
        let mut h = T::zero();
        for w in self.nodes.windows(2) {
            h = h.max(w[1] - w[0]);
        }
        if let Some(p) = self.period() {
            h = h.max(p - self.nodes[self.len() - 1] + self.nodes[0]);
        }
        h
    }

    /// Nodes `(k0, k1)` around `x` and the weight of `k1`.
    fn bracket(&self, x: T) -> Option<(usize, usize, T)> {
        let n = self.len();
        if let Some(p) = self.period() {
            let x = x - (x / p).floor() * p;
            let k0 = self.nodes.partition_point(|&v| v <= x).saturating_sub(1);
            let (k1, right) = if k0 + 1 < n { (k0 + 1, self.nodes[k0 + 1]) } else { (0, p + self.nodes[0]) };
            return Some((k0, k1, (x - self.nodes[k0]) / (right - self.nodes[k0])));
        }
        let tol = T::epsilon() * T::lit(16.0) * (T::one() + x.abs());
        if x < self.nodes[0] - tol || x > self.nodes[n - 1] + tol {
            return None;
        }
        let k0 = self.nodes.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let t = ((x - self.nodes[k0]) / (self.nodes[k0 + 1] - self.nodes[k0])).max(T::zero()).min(T::one());
        Some((k0, k0 + 1, t))
    }

    /// Trapezoidal weights (uniform for periodic axes).
    pub fn trapezoid_weights(&self) -> Vec<T> {
        let n = self.len();
        if let Some(p) = self.period() {
            return vec![p / T::of(n); n];
        }
        let half = T::lit(0.5);
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.nodes[i] - self.nodes[i - 1] } else { T::zero() };
                let right = if i + 1 < n { self.nodes[i + 1] - self.nodes[i] } else { T::zero() };
                half * (left + right)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    /// The `y = 0` face.
    Bottom,
    /// Lateral faces of bounded horizontal axes (and `r = r_max`).
    Lateral,
    /// The `y = y_max` face.
    Top,
}

/// Tensor-product grid, possibly graded toward `y = 0` and the knot axis.
#[derive(Clone, Debug)]
pub struct GradedGrid<T> {
    pub kind: DomainKind,
    pub axes: Vec<Axis<T>>,
    pub knots: Vec<KnotPoint<T>>,
    pub grading: Grading<T>,
    strides: Vec<usize>,
}

/// Builds a graded grid for a domain.
///
/// `resolution` holds one node count per axis, ordered as the axes of the
/// domain kind (horizontal axes first, `y` last).
pub fn build_grid<T: Real>(
    spec: &DomainSpec<T>,
    resolution: &[usize],
    grading: Grading<T>,
) -> Result<GradedGrid<T>> {
    spec.validate()?;
    if resolution.len() != spec.kind.axis_count() {
        return Err(Error::invalid(format!(
            "{} needs {} resolution entries, got {}",
            spec.kind.name(),
            spec.kind.axis_count(),
            resolution.len()
        )));
    }
    if resolution.iter().any(|&n| n < MIN_AXIS_NODES) {
        return Err(Error::invalid(format!(
            "resolution below minimum ({MIN_AXIS_NODES} nodes per axis)"
        )));
    }
    for e in [grading.y_exponent, grading.radial_exponent] {
        if !(e >= T::one() && e <= T::lit(4.0)) {
            return Err(Error::invalid("grading exponents must lie in [1, 4]"));
        }
    }

    let bounded = |n: usize| -> Vec<T> { (0..n).map(|i| T::of(i) / T::of(n - 1)).collect() };
    let vertical = |n: usize| -> Axis<T> {
        let params: Vec<T> = if grading.include_y0 {
            bounded(n)
        } else {
            (1..=n).map(|i| T::of(i) / T::of(n)).collect()
        };
        Axis::power(AxisRole::Vertical, T::zero(), spec.y_max, grading.y_exponent, params)
    };

    let axes = match spec.kind {
        DomainKind::OdeLine => vec![vertical(resolution[0])],
        DomainKind::LimitSurface => vec![
            Axis::periodic(spec.extents[0], resolution[0]),
            Axis::periodic(spec.extents[1], resolution[1]),
        ],
        DomainKind::AxisymSlab => vec![
            Axis::power(
                AxisRole::Radial,
                T::zero(),
                spec.extents[0],
                grading.radial_exponent,
                bounded(resolution[0]),
            ),
            vertical(resolution[1]),
        ],
        DomainKind::TorusHalfCylinder => vec![
            Axis::periodic(spec.extents[0], resolution[0]),
            Axis::periodic(spec.extents[1], resolution[1]),
            vertical(resolution[2]),
        ],
        DomainKind::PlaneHalfSpace => {
            let l = spec.extents[0];
            let two = T::lit(2.0);
            vec![
                Axis::power(AxisRole::Horizontal, -l, two * l, T::one(), bounded(resolution[0])),
                Axis::power(AxisRole::Horizontal, -l, two * l, T::one(), bounded(resolution[1])),
                vertical(resolution[2]),
            ]
        }
    };
    Ok(GradedGrid::from_axes(spec.kind, axes, spec.knots.clone(), grading))
}

impl<T: Real> GradedGrid<T> {
    pub fn from_axes(
        kind: DomainKind,
        axes: Vec<Axis<T>>,
        knots: Vec<KnotPoint<T>>,
        grading: Grading<T>,
    ) -> Self {
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].len();
        }
        Self { kind, axes, knots, grading, strides }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Per-axis indices of a node.
    pub fn unravel(&self, mut i: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for (a, s) in self.strides.iter().enumerate() {
            out[a] = i / s;
            i %= s;
        }
        out
    }

    pub fn vertical_axis(&self) -> Option<usize> {
        self.axes.iter().position(|a| a.role == AxisRole::Vertical)
    }

    pub fn horizontal_axes(&self) -> std::ops::Range<usize> {
        0..self.vertical_axis().unwrap_or(self.axes.len())
    }

    /// Number of distinct horizontal positions (1 for `y`-only grids).
    pub fn horizontal_len(&self) -> usize {
        self.horizontal_axes().map(|a| self.axes[a].len()).product()
    }

    pub fn vertical_len(&self) -> usize {
        self.vertical_axis().map_or(1, |a| self.axes[a].len())
    }

    /// Index of the horizontal position of node `i`.
    pub fn horizontal_index(&self, i: usize) -> usize {
        i / self.vertical_len()
    }

    pub fn vertical_index(&self, i: usize) -> usize {
        i % self.vertical_len()
    }

    pub fn y(&self, i: usize) -> T {
        match self.vertical_axis() {
            Some(a) => self.axes[a].nodes[self.unravel(i)[a]],
            None => T::zero(),
        }
    }

    pub fn y_nodes(&self) -> &[T] {
        match self.vertical_axis() {
            Some(a) => &self.axes[a].nodes,
            None => &[],
        }
    }

    /// Horizontal position of node `i` (`r + 0i` on axisymmetric slabs).
    pub fn z(&self, i: usize) -> Complex<T> {
        let m = self.unravel(i);
        match self.kind {
            DomainKind::OdeLine => Complex::new(T::zero(), T::zero()),
            DomainKind::AxisymSlab => Complex::new(self.axes[0].nodes[m[0]], T::zero()),
            _ => Complex::new(self.axes[0].nodes[m[0]], self.axes[1].nodes[m[1]]),
        }
    }

    /// Horizontal position of horizontal node `h`.
    pub fn z_of_horizontal(&self, h: usize) -> Complex<T> {
        self.z(h * self.vertical_len())
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.kind == DomainKind::AxisymSlab
    }

    pub fn includes_y0(&self) -> bool {
        self.vertical_axis().is_some_and(|a| self.axes[a].nodes[0] == T::zero())
    }

    pub fn classify(&self, i: usize) -> NodeClass {
        let m = self.unravel(i);
        if let Some(v) = self.vertical_axis() {
            let n = self.axes[v].len();
            if m[v] == 0 && self.axes[v].nodes[0] == T::zero() {
                return NodeClass::Bottom;
            }
            if m[v] == n - 1 {
                return NodeClass::Top;
            }
        }
        for a in self.horizontal_axes() {
            let axis = &self.axes[a];
            if axis.is_periodic() {
                continue;
            }
            let last = axis.len() - 1;
            let at_lo = m[a] == 0 && axis.role != AxisRole::Radial;
            if at_lo || m[a] == last {
                return NodeClass::Lateral;
            }
        }
        NodeClass::Interior
    }

    /// Tensor-product trapezoidal quadrature weights.
    pub fn quadrature_weights(&self) -> Vec<T> {
        let per_axis: Vec<Vec<T>> = self.axes.iter().map(Axis::trapezoid_weights).collect();
        (0..self.len())
            .map(|i| {
                let m = self.unravel(i);
                per_axis.iter().enumerate().fold(T::one(), |acc, (a, w)| acc * w[m[a]])
            })
            .collect()
    }

    /// Measure of the (rectangular) computational domain.
    pub fn measure(&self) -> T {
        self.axes
            .iter()
            .map(|a| match a.period() {
                Some(p) => p,
                None => a.nodes[a.len() - 1] - a.nodes[0],
            })
            .fold(T::one(), |acc, l| acc * l)
    }

    /// Representative mesh size: the largest spacing over all axes.
    pub fn max_spacing(&self) -> T {
        self.axes.iter().fold(T::zero(), |h, a| h.max(a.max_spacing()))
    }

    /// The periodic horizontal factor of a half-cylinder grid as a
    /// limiting-surface grid.
    pub fn horizontal_grid(&self) -> Result<Self> {
        if self.kind != DomainKind::TorusHalfCylinder {
            return Err(Error::invalid("only half-cylinder grids have a periodic horizontal factor"));
        }
        let axes = self.axes[self.horizontal_axes()].to_vec();
        Ok(Self::from_axes(DomainKind::LimitSurface, axes, self.knots.clone(), self.grading))
    }

    /// Multilinear interpolation of nodal `values` at the physical point
    /// `(z, y)`; on axisymmetric slabs the radial coordinate is `|z|`.
    /// `None` outside the grid or when a corner value is not finite.
    pub fn interpolate(&self, values: &[T], z: Complex<T>, y: T) -> Option<T> {
        let coords: Vec<T> = match self.kind {
            DomainKind::OdeLine => vec![y],
            DomainKind::LimitSurface => vec![z.re, z.im],
            DomainKind::AxisymSlab => vec![z.norm(), y],
            DomainKind::TorusHalfCylinder | DomainKind::PlaneHalfSpace => vec![z.re, z.im, y],
        };
        let mut brackets = Vec::with_capacity(coords.len());
        for (axis, &x) in self.axes.iter().zip(&coords) {
            brackets.push(axis.bracket(x)?);
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << brackets.len()) {
            let mut idx = [0usize; 3];
            let mut w = T::one();
            for (a, &(k0, k1, t)) in brackets.iter().enumerate() {
                if corner >> a & 1 == 1 {
                    idx[a] = k1;
                    w = w * t;
                } else {
                    idx[a] = k0;
                    w = w * (T::one() - t);
                }
            }
            if w == T::zero() {
                continue;
            }
            let v = values[self.index(&idx[..brackets.len()])];
            if !v.is_finite() {
                return None;
            }
            acc = acc + w * v;
        }
        Some(acc)
    }

    /// Copy of this grid with the `y = 0` layer removed.
    pub fn without_bottom(&self) -> Result<Self> {
        let v = self
            .vertical_axis()
            .ok_or_else(|| Error::invalid("grid has no vertical axis"))?;
        if !self.includes_y0() {
            return Ok(self.clone());
        }
        let mut axes = self.axes.clone();
        axes[v].params.remove(0);
        axes[v].nodes.remove(0);
        let mut grading = self.grading;
        grading.include_y0 = false;
        Ok(Self::from_axes(self.kind, axes, self.knots.clone(), grading))
    }
}

/// Real nodal values on a grid.
#[derive(Clone, Debug)]
pub struct ScalarField<T> {
    grid: Arc<GradedGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Arc<GradedGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite field value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<GradedGrid<T>>, f: impl Fn(usize) -> T) -> Result<Self> {
        let values = (0..grid.len()).map(f).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<GradedGrid<T>>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![T::zero(); n] }
    }

    pub fn grid(&self) -> &Arc<GradedGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Interior,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldNorms<T> {
    pub linf: T,
    pub l2: T,
    /// L2 norm with weight `y^2`.
    pub weighted_l2: T,
}

/// L-infinity, L2 and `y^2`-weighted L2 norms with trapezoidal weights.
pub fn field_norms<T: Real>(f: &ScalarField<T>, region: Region) -> FieldNorms<T> {
    let grid = f.grid();
    let weights = grid.quadrature_weights();
    let mut linf = T::zero();
    let mut l2 = T::zero();
    let mut wl2 = T::zero();
    for (i, (&v, &w)) in f.values().iter().zip(&weights).enumerate() {
        if region == Region::Interior && grid.classify(i) != NodeClass::Interior {
            continue;
        }
        let y = grid.y(i);
        linf = linf.max(v.abs());
        l2 = l2 + w * v * v;
        wl2 = wl2 + w * y * y * v * v;
    }
    FieldNorms { linf, l2: l2.sqrt(), weighted_l2: wl2.sqrt() }
}

/// Spherical coordinates `(R, psi, theta)` about a knot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spherical<T> {
    pub radius: T,
    pub psi: T,
    pub theta: T,
}

/// `R = sqrt(r^2 + y^2)`, `sin(psi) = y / R`, `theta = arg(z - p)`.
pub fn spherical_coords<T: Real>(z: Complex<T>, y: T, knot: &KnotPoint<T>) -> Result<Spherical<T>> {
    if y < T::zero() {
        return Err(Error::invalid("spherical coordinates need y >= 0"));
    }
    let w = z - knot.position;
    let r = w.norm();
    let radius = r.hypot(y);
    if radius == T::zero() {
        return Err(Error::CoordinateSingularity("point coincides with the knot".into()));
    }
    Ok(Spherical { radius, psi: y.atan2(r), theta: w.im.atan2(w.re) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc<T: Real>(g: GradedGrid<T>) -> Arc<GradedGrid<T>> {
        Arc::new(g)
    }

    #[test]
    fn uniform_ode_line_spacing() {
        let g = build_grid(&DomainSpec::ode_line(10.0f64), &[1001], Grading::uniform()).unwrap();
        let y = g.y_nodes();
        assert_eq!(y.len(), 1001);
        for w in y.windows(2) {
            assert!((w[1] - w[0] - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn graded_cylinder_node_count_and_spacing_ratio() {
        let spec = DomainSpec::torus_half_cylinder(1.0f64, 1.0, 4.0);
        let g = build_grid(&spec, &[32, 32, 64], Grading::default().excluding_y0()).unwrap();
        assert_eq!(g.len(), 65536);
        let y = g.y_nodes();
        let first = y[0];
        let last = y[63] - y[62];
        // y(t) = 4 t^2, t = i/64: first gap Y/64^2, last gap Y*127/64^2
        assert!((first / last - 1.0 / 127.0).abs() < 1e-12);
    }

    #[test]
    fn too_coarse_plane_is_rejected() {
        let spec = DomainSpec::plane_half_space(2.0f64, 2.0, vec![KnotPoint::at(0.0, 0.0, 1).unwrap()]);
        let err = build_grid(&spec, &[4, 4, 4], Grading::default()).unwrap_err();
        assert!(err.to_string().contains("resolution below minimum"));
    }

    #[test]
    fn knots_outside_and_bad_height_rejected() {
        let spec = DomainSpec::plane_half_space(1.0f64, 2.0, vec![KnotPoint::at(3.0, 0.0, 1).unwrap()]);
        assert!(build_grid(&spec, &[8, 8, 8], Grading::default()).is_err());
        let spec = DomainSpec::<f64>::ode_line(0.0);
        assert!(build_grid(&spec, &[16], Grading::default()).is_err());
    }

    #[test]
    fn spherical_examples() {
        let k = KnotPoint::at(0.0, 0.0, 1).unwrap();
        let s = spherical_coords(Complex::new(1.0f64, 0.0), 1.0, &k).unwrap();
        assert!((s.radius - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.psi - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(s.theta, 0.0);
        let s = spherical_coords(Complex::new(0.0f64, 0.0), 2.0, &k).unwrap();
        assert_eq!(s.radius, 2.0);
        assert!((s.psi - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let e = spherical_coords(Complex::new(0.0f64, 0.0), 0.0, &k).unwrap_err();
        assert!(matches!(e, Error::CoordinateSingularity(_)));
    }

    #[test]
    fn norms_of_simple_fields() {
        let spec = DomainSpec::torus_half_cylinder(1.0f64, 1.0, 1.0);
        let g = arc(build_grid(&spec, &[8, 8, 8], Grading::uniform()).unwrap());
        let one = ScalarField::from_fn(g.clone(), |_| 1.0).unwrap();
        assert_eq!(field_norms(&one, Region::All).linf, 1.0);
        let zero = ScalarField::zeros(g);
        let n = field_norms(&zero, Region::All);
        assert_eq!((n.linf, n.l2, n.weighted_l2), (0.0, 0.0, 0.0));

        let line = arc(build_grid(&DomainSpec::ode_line(1.0f64), &[1001], Grading::uniform()).unwrap());
        let yf = ScalarField::from_fn(line.clone(), |i| line.y(i)).unwrap();
        let n = field_norms(&yf, Region::All);
        assert!((n.l2 - 1.0 / 3f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = arc(build_grid(&DomainSpec::ode_line(1.0f64), &[8], Grading::uniform()).unwrap());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(ScalarField::new(g, v).is_err());
    }

    #[test]
    fn classification_of_plane_nodes() {
        let spec = DomainSpec::plane_half_space(1.0f64, 1.0, vec![]);
        let g = build_grid(&spec, &[8, 8, 8], Grading::uniform()).unwrap();
        assert_eq!(g.classify(g.index(&[3, 3, 0])), NodeClass::Bottom);
        assert_eq!(g.classify(g.index(&[3, 3, 7])), NodeClass::Top);
        assert_eq!(g.classify(g.index(&[0, 3, 3])), NodeClass::Lateral);
        assert_eq!(g.classify(g.index(&[3, 3, 3])), NodeClass::Interior);
        let ax = build_grid(&DomainSpec::axisym_slab(1.0f64, 1.0, 1), &[8, 8], Grading::uniform()).unwrap();
        assert_eq!(ax.classify(ax.index(&[0, 3])), NodeClass::Interior);
        assert_eq!(ax.classify(ax.index(&[7, 3])), NodeClass::Lateral);
    }

    #[test]
    fn single_precision_grid() {
        let g = build_grid(&DomainSpec::ode_line(2.0f32), &[9], Grading::uniform()).unwrap();
        assert!((g.y_nodes()[4] - 1.0).abs() < 1e-6);
    }
}

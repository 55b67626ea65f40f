//! The hemisphere operator
//!
//! ```text
//! J = -(1/cos ψ) ∂_ψ (cos ψ ∂_ψ) + m²/cos²ψ + T(ψ)
//! ```
//!
//! on `ψ ∈ (0, π/2]` (ψ = 0 is the boundary face, ψ = π/2 the axis above the
//! knot) and the indicial roots it induces.

use crate::error::{Error, Result};
use crate::linalg::{inverse_iteration, lowest_eigenvalues};
use crate::model::closed_form::eval_sn;
use crate::scalar::Real;

pub const MIN_RESOLUTION: usize = 64;
pub const MAX_EIGEN_COUNT: usize = 20;
/// Largest allowed gap between the two Richardson extrapolants, relative to
/// `max(1, λ)`.
pub const EXTRAPOLATION_TOLERANCE: f64 = 1e-6;

/// Which form of the potential to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Potential {
    /// `2 r^{2n} e^{2U_n} R² = 2(n+1)² cos^{2n}ψ / (sin²ψ S_n²)`.
    #[default]
    Linearized,
    /// `(n+1)² / (sin²ψ S_n²)`.
    Displayed,
}

/// `T(ψ)`.
pub fn eval_t<T: Real>(n: usize, psi: T, form: Potential) -> Result<T> {
    if !(psi > T::zero()) || psi > T::FRAC_PI_2() + T::epsilon() {
        return Err(Error::CoordinateSingularity(format!("T(ψ) is singular at ψ = {}", psi.to_f64_lossy())));
    }
    let s = psi.sin();
    let sn = eval_sn(n, psi);
    let np1 = T::of(n + 1);
    Ok(match form {
        Potential::Linearized => {
            let c = psi.cos().max(T::zero());
            T::lit(2.0) * np1 * np1 * c.powi(2 * n as i32) / (s * s * sn * sn)
        }
        Potential::Displayed => np1 * np1 / (s * s * sn * sn),
    })
}

/// Discretisation parameters of `J`.
#[derive(Clone, Copy, Debug)]
pub struct HemisphereOperator {
    pub n: usize,
    pub m: i64,
    pub resolution: usize,
    pub potential: Potential,
}

impl HemisphereOperator {
    pub fn new(n: usize, m: i64, resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::invalid(format!("resolution must be at least {MIN_RESOLUTION}")));
        }
        Ok(Self { n, m, resolution, potential: Potential::Linearized })
    }

    /// Nodes `ψ_i = i π / (2N)`, `i = 0..=N`.
    pub fn nodes<T: Real>(&self) -> Vec<T> {
        let h = T::FRAC_PI_2() / T::of(self.resolution);
        (0..=self.resolution).map(|i| T::of(i) * h).collect()
    }

    /// Symmetric tridiagonal form `M^{-1/2} K M^{-1/2}` on the free nodes,
    /// with the lumped masses `M` of those nodes.
    pub fn assemble<T: Real>(&self) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        let nn = self.resolution;
        let h = T::FRAC_PI_2() / T::of(nn);
        let half = T::lit(0.5);
        let last = if self.m == 0 { nn } else { nn - 1 };
        let m2 = T::of((self.m * self.m) as usize);
        let mut mass = Vec::with_capacity(last);
        let mut stiff_diag = Vec::with_capacity(last);
        let mut stiff_off = Vec::with_capacity(last.saturating_sub(1));
        for i in 1..=last {
            let psi = T::of(i) * h;
            let lo = psi - half * h;
            let hi = (psi + half * h).min(T::FRAC_PI_2());
            let mi = hi.sin() - lo.sin();
            let cl = lo.cos() / h;
            let cr = if i < nn { hi.cos() / h } else { T::zero() };
            let c = psi.cos();
            let centrifugal = if self.m == 0 { T::zero() } else { m2 / (c * c) };
            let v = centrifugal + eval_t(self.n, psi, self.potential)?;
            mass.push(mi);
            stiff_diag.push(cl + cr + v * mi);
            if i < last {
                stiff_off.push(-cr);
            }
        }
        let diag: Vec<T> = stiff_diag.iter().zip(&mass).map(|(&k, &m)| k / m).collect();
        let off: Vec<T> = (0..stiff_off.len()).map(|i| stiff_off[i] / (mass[i] * mass[i + 1]).sqrt()).collect();
        Ok((diag, off, mass))
    }

    /// Lowest `count` eigenvalues and `cos ψ`-normalised eigenfunctions on
    /// the nodes (zero at `ψ = 0`, and at `ψ = π/2` when `m ≠ 0`).
    pub fn solve<T: Real>(&self, count: usize) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let (diag, off, mass) = self.assemble::<T>()?;
        if count > diag.len() {
            return Err(Error::invalid("more eigenvalues requested than unknowns"));
        }
        let vals = lowest_eigenvalues(&diag, &off, count);
        let mut vecs = Vec::with_capacity(count);
        for &lam in &vals {
            let x = inverse_iteration(&diag, &off, lam);
            let mut mu = vec![T::zero(); self.resolution + 1];
            for (k, &xk) in x.iter().enumerate() {
                mu[k + 1] = xk / mass[k].sqrt();
            }
            let norm = (1..mu.len()).filter(|&k| k - 1 < mass.len()).map(|k| mass[k - 1] * mu[k] * mu[k]).sum::<T>().sqrt();
            let peak = mu.iter().copied().fold(T::zero(), |a, b| if b.abs() > a.abs() { b } else { a });
            let sign = if peak < T::zero() { -T::one() } else { T::one() };
            for v in &mut mu {
                *v = sign * *v / norm;
            }
            vecs.push(mu);
        }
        Ok((vals, vecs))
    }

    /// `⟨Jμ, μ⟩ / ⟨μ, μ⟩` in the discrete `cos ψ`-weighted product.
    pub fn rayleigh_quotient<T: Real>(&self, mu: &[T]) -> Result<T> {
        let (diag, off, mass) = self.assemble::<T>()?;
        let x: Vec<T> = (0..diag.len()).map(|k| mu[k + 1] * mass[k].sqrt()).collect();
        let mut num = T::zero();
        for k in 0..x.len() {
            let mut ax = diag[k] * x[k];
            if k > 0 {
                ax = ax + off[k - 1] * x[k - 1];
            }
            if k + 1 < x.len() {
                ax = ax + off[k] * x[k + 1];
            }
            num = num + ax * x[k];
        }
        Ok(num / x.iter().map(|&v| v * v).sum::<T>())
    }
}

/// Eigendata of `J` for one `(n, m)`.
#[derive(Clone, Debug)]
pub struct Spectrum<T> {
    pub n: usize,
    pub m: i64,
    /// Richardson-extrapolated eigenvalues, increasing.
    pub values: Vec<T>,
    /// Eigenvalues of the finest discretisation.
    pub discrete: Vec<T>,
    /// Gap between the extrapolants from `(N, 2N)` and `(2N, 4N)`.
    pub extrapolation_gap: Vec<T>,
    /// Nodes of the finest discretisation.
    pub psi: Vec<T>,
    /// Eigenfunctions on `psi`, normalised in the `cos ψ` product with
    /// positive ground state.
    pub vectors: Vec<Vec<T>>,
    pub resolution: usize,
}

impl<T: Real> Spectrum<T> {
    /// Ground state scaled to peak 1. The smooth ratio `μ₀ / sin²ψ` is
    /// interpolated by Catmull-Rom cubics (reflected evenly at `ψ = 0`), so
    /// the `ψ²` vanishing at the boundary face is reproduced exactly.
    pub fn ground_state_at(&self, psi: T) -> T {
        let mu = &self.vectors[0];
        let n = mu.len();
        let peak = mu.iter().copied().fold(T::zero(), T::max);
        let h = self.psi[1];
        let s2 = |p: T| {
            let s = p.sin();
            s * s
        };
        let mut g: Vec<T> = (0..n).map(|k| if k == 0 { T::zero() } else { mu[k] / s2(self.psi[k]) }).collect();
        g[0] = (T::lit(4.0) * g[1] - g[2]) / T::lit(3.0);
        let at = |k: isize| -> T {
            if k < 0 {
                g[(-k) as usize]
            } else if k as usize >= n {
                let last = g[n - 1];
                last + T::of(k as usize + 1 - n) * (last - g[n - 2])
            } else {
                g[k as usize]
            }
        };
        let t = (psi.max(T::zero()) / h).min(T::of(n - 1));
        let k = (t.floor().to_f64_lossy() as isize).min(n as isize - 2);
        let w = t - T::of(k as usize);
        let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
        let half = T::lit(0.5);
        let val = p1
            + half * w * (p2 - p0 + w * (T::lit(2.0) * p0 - T::lit(5.0) * p1 + T::lit(4.0) * p2 - p3 + w * (T::lit(3.0) * (p1 - p2) + p3 - p0)));
        val * s2(psi) / peak
    }

    pub fn indicial(&self) -> Result<IndicialTable<T>> {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for &l in &self.values {
            let (p, m) = indicial_radial(l)?;
            plus.push(p);
            minus.push(m);
        }
        Ok(IndicialTable {
            eigenvalues: self.values.clone(),
            delta_plus: plus,
            delta_minus: minus,
            boundary: indicial_boundary(),
        })
    }
}

/// Lowest `count` eigenvalues of `J(n, m)` at resolutions `N`, `2N`, `4N`
/// with Richardson extrapolation of the `h²` error.
pub fn eigen_j<T: Real>(n: usize, m: i64, count: usize, resolution: usize) -> Result<Spectrum<T>> {
    eigen_j_with(n, m, count, resolution, Potential::Linearized)
}

pub fn eigen_j_with<T: Real>(n: usize, m: i64, count: usize, resolution: usize, potential: Potential) -> Result<Spectrum<T>> {
    if count == 0 || count > MAX_EIGEN_COUNT {
        return Err(Error::invalid(format!("eigenvalue count must be in 1..={MAX_EIGEN_COUNT}")));
    }
    let mut ops = Vec::new();
    for k in 0..3 {
        let mut op = HemisphereOperator::new(n, m, resolution << k)?;
        op.potential = potential;
        ops.push(op);
    }
    let l0 = ops[0].solve::<T>(count)?.0;
    let l1 = ops[1].solve::<T>(count)?.0;
    let (l2, vectors) = ops[2].solve::<T>(count)?;
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let mut values = Vec::with_capacity(count);
    let mut gaps = Vec::with_capacity(count);
    for i in 0..count {
        let r1 = (four * l1[i] - l0[i]) / three;
        let r2 = (four * l2[i] - l1[i]) / three;
        let gap = (r2 - r1).abs();
        if gap > T::lit(EXTRAPOLATION_TOLERANCE) * r2.abs().max(T::one()) {
            return Err(Error::NonConvergence {
                what: format!("Richardson extrapolation of eigenvalue {i} (n={n}, m={m})"),
                iterations: 3,
                last_residual: gap.to_f64_lossy(),
                history: vec![l0[i].to_f64_lossy(), l1[i].to_f64_lossy(), l2[i].to_f64_lossy()],
            });
        }
        values.push(r2);
        gaps.push(gap);
    }
    Ok(Spectrum {
        n,
        m,
        values,
        discrete: l2,
        extrapolation_gap: gaps,
        psi: ops[2].nodes(),
        vectors,
        resolution: ops[2].resolution,
    })
}

/// Eigenvalues and radial indicial roots with the boundary pair.
#[derive(Clone, Debug)]
pub struct IndicialTable<T> {
    pub eigenvalues: Vec<T>,
    pub delta_plus: Vec<T>,
    pub delta_minus: Vec<T>,
    pub boundary: [T; 2],
}

/// `δ± = -1/2 ± √(1 + 4λ)/2`, the exponents of `R^δ μ` annihilated by
/// `-∂_R² - (2/R)∂_R + λ/R²`.
pub fn indicial_radial<T: Real>(lambda: T) -> Result<(T, T)> {
    let disc = T::one() + T::lit(4.0) * lambda;
    if !(disc > T::zero()) {
        return Err(Error::invalid(format!("complex indicial roots for λ = {}", lambda.to_f64_lossy())));
    }
    let half = T::lit(0.5);
    let root = disc.sqrt();
    Ok((-half + half * root, -half - half * root))
}

/// Roots of `γ(γ - 1) = 2`, the exponents of `y^γ` annihilated by
/// `-∂_y² + 2/y²`.
pub fn indicial_boundary<T: Real>() -> [T; 2] {
    [T::lit(2.0), -T::one()]
}

/// Ground-state data for every `m` in `0..=m_max`.
pub fn mode_survey<T: Real>(n: usize, m_max: i64, count: usize, resolution: usize) -> Result<Vec<Spectrum<T>>> {
    (0..=m_max).map(|m| eigen_j(n, m, count, resolution)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_limits() {
        for n in 0..4 {
            let psi = 1e-5f64;
            let t = eval_t(n, psi, Potential::Linearized).unwrap();
            assert!((psi * psi * t - 2.0).abs() < 1e-8);
            if n > 0 {
                assert!(eval_t(n, std::f64::consts::FRAC_PI_2, Potential::Linearized).unwrap().abs() < 1e-25);
            }
        }
        let psi = 0.7f64;
        assert!((eval_t(0, psi, Potential::Linearized).unwrap() - 2.0 / psi.sin().powi(2)).abs() < 1e-12);
        assert!(eval_t(1, 0.0f64, Potential::Linearized).is_err());
    }

    #[test]
    fn ground_state_for_plain_pole() {
        let s = eigen_j::<f64>(0, 0, 3, 64).unwrap();
        assert!((s.values[0] - 6.0).abs() < 1e-6, "{:?}", s.values);
        // μ₀ ∝ sin²ψ
        let mu = &s.vectors[0];
        let k = s.psi.len() - 1;
        for (i, &p) in s.psi.iter().enumerate().step_by(37) {
            assert!((mu[i] / mu[k] - p.sin().powi(2)).abs() < 1e-3);
        }
        for p in [1e-4, 0.013, 0.3, 1.5] {
            let ratio = s.ground_state_at(p) / p.sin().powi(2);
            assert!((ratio - 1.0).abs() < 1e-3, "{p} {ratio}");
        }
    }

    #[test]
    fn rayleigh_and_orthogonality() {
        let op = HemisphereOperator::new(1, 0, 128).unwrap();
        let (vals, vecs) = op.solve::<f64>(4).unwrap();
        let (_, _, mass) = op.assemble::<f64>().unwrap();
        for i in 0..4 {
            assert!((op.rayleigh_quotient(&vecs[i]).unwrap() - vals[i]).abs() < 1e-8 * vals[i]);
            for j in 0..i {
                let dot: f64 = (0..mass.len()).map(|k| mass[k] * vecs[i][k + 1] * vecs[j][k + 1]).sum();
                assert!(dot.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn eigenvalues_increase_with_m() {
        let mut last = 0.0;
        for m in 0..4 {
            let s = eigen_j::<f64>(1, m, 1, 64).unwrap();
            assert!(s.values[0] > last);
            last = s.values[0];
        }
    }

    #[test]
    fn roots() {
        assert_eq!(indicial_radial(2.0f64).unwrap(), (1.0, -2.0));
        assert_eq!(indicial_radial(6.0f64).unwrap(), (2.0, -3.0));
        assert_eq!(indicial_radial(0.0f64).unwrap(), (0.0, -1.0));
        assert!(indicial_radial(-0.25f64).is_err());
        let [a, b] = indicial_boundary::<f64>();
        for g in [a, b] {
            assert_eq!(g * (g - 1.0), 2.0);
        }
    }

    #[test]
    fn small_resolution_rejected() {
        assert!(eigen_j::<f64>(0, 0, 1, 32).is_err());
        assert!(eigen_j::<f64>(0, 0, 21, 64).is_err());
    }
}

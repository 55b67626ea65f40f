//! Small dense and banded kernels: tridiagonal solves and symmetric
//! tridiagonal eigenproblems.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves a tridiagonal system. Row `i` reads
/// `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`;
/// `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal<T: Real>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] = x[i] - c[i + 1] * next;
    }
    x
}

/// Periodic tridiagonal solve: `sub[0]` couples `x[n-1]` into row 0 and
/// `sup[n-1]` couples `x[0]` into row `n-1`.
pub fn solve_cyclic_tridiagonal<T: Real>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    if n <= 2 {
        // dense fallback
        if n == 1 {
            return vec![rhs[0] / (diag[0] + sub[0] + sup[0])];
        }
        let a = [[diag[0], sup[0] + sub[0]], [sub[1] + sup[1], diag[1]]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        return vec![
            (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det,
            (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
        ];
    }
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] = diag[0] - gamma;
    d[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &d, sup, rhs);
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &d, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (T::one() + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect()
}

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit QL.
///
/// `off[i]` couples rows `i` and `i+1` (length `n-1`). Returns eigenvalues in
/// ascending order and the matching orthonormal eigenvectors.
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    let mut z = vec![vec![T::zero(); n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence {
                    what: "tridiagonal QL".into(),
                    iterations: iter,
                    last_residual: e[l].to_f64_lossy(),
                    history: vec![],
                });
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let fz = row[i + 1];
                    row[i + 1] = s * row[i] + c * fz;
                    row[i] = c * row[i] - s * fz;
                }
            }
            if early {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order.iter().map(|&k| z.iter().map(|row| row[k]).collect()).collect();
    Ok((values, vectors))
}

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
pub fn sturm_count<T: Real>(diag: &[T], off: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < T::zero() {
        count += 1;
    }
    for i in 1..diag.len() {
        if q.abs() < tiny {
            q = tiny;
        }
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Lowest `count` eigenvalues of a symmetric tridiagonal matrix by bisection.
pub fn lowest_eigenvalues<T: Real>(diag: &[T], off: &[T], count: usize) -> Vec<T> {
    let n = diag.len();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let r = (if i > 0 { off[i - 1].abs() } else { T::zero() })
            + (if i + 1 < n { off[i].abs() } else { T::zero() });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let two = T::lit(2.0);
    (0..count.min(n))
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = (a + b) / two;
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(diag, off, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            (a + b) / two
        })
        .collect()
}

/// Unit eigenvector for an accurately known eigenvalue by inverse iteration.
pub fn inverse_iteration<T: Real>(diag: &[T], off: &[T], lambda: T) -> Vec<T> {
    let n = diag.len();
    let scale = diag.iter().fold(T::one(), |m, &d| m.max(d.abs()));
    let shift = lambda - scale * T::epsilon() * T::lit(16.0);
    let d: Vec<T> = diag.iter().map(|&v| v - shift).collect();
    let mut sub = vec![T::zero(); n];
    let mut sup = vec![T::zero(); n];
    sub[1..n].copy_from_slice(&off[..(n - 1)]);
    sup[..(n - 1)].copy_from_slice(&off[..(n - 1)]);
    let mut x = vec![T::one(); n];
    for _ in 0..4 {
        x = solve_tridiagonal(&sub, &d, &sup, &x);
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        for v in &mut x {
            *v = *v / norm;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_product() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| -1.0 + 0.1 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.5 - 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += sup[i] * x[i + 1];
                }
                v
            })
            .collect();
        let y = solve_tridiagonal(&sub, &diag, &sup, &b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn cyclic_matches_product() {
        let n = 9;
        let sub = vec![-1.0; n];
        let sup = vec![-1.2; n];
        let diag = vec![3.0; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| diag[i] * x[i] + sub[i] * x[(i + n - 1) % n] + sup[i] * x[(i + 1) % n])
            .collect();
        let y = solve_cyclic_tridiagonal(&sub, &diag, &sup, &b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn second_difference_spectrum() {
        // eigenvalues of tridiag(-1, 2, -1): 2 - 2 cos(k pi / (n + 1))
        let n = 12;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let (vals, vecs) = tridiagonal_eigen(&diag, &off).unwrap();
        let bis = lowest_eigenvalues(&diag, &off, 4);
        for k in 0..n {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((vals[k] - exact).abs() < 1e-12);
            if k < 4 {
                assert!((bis[k] - exact).abs() < 1e-12);
            }
        }
        for (a, va) in vecs.iter().enumerate() {
            for (b, vb) in vecs.iter().enumerate() {
                let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
        let v = inverse_iteration(&diag, &off, bis[0]);
        let dot: f64 = v.iter().zip(&vecs[0]).map(|(x, y)| x * y).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-12);
    }
}

//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Sum
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count or index into `Self`.
    #[inline]
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(2x) - 1 - 2x` without cancellation for small `x`.
pub fn exp2_minus_linear<T: Real>(x: T) -> T {
    let two = T::lit(2.0);
    if x.abs() < T::lit(0.05) {
        // series: sum_{k>=2} (2x)^k / k!
        let t = two * x;
        let mut term = t * t / two;
        let mut sum = term;
        for k in 3..30 {
            term = term * t / T::of(k);
            sum = sum + term;
            if term.abs() <= T::epsilon() * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (two * x).exp_m1() - two * x
    }
}

/// Maximum absolute value of a slice (0 for empty input).
pub fn max_abs<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope<T: Real>(xs: &[T], ys: &[T]) -> T {
    let n = T::of(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_direct_for_moderate_arguments() {
        for &x in &[1e-3f64, 0.01, 0.049, 0.051, 0.3, -0.02] {
            let direct = (2.0 * x).exp() - 1.0 - 2.0 * x;
            let s = exp2_minus_linear(x);
            assert!((s - direct).abs() <= 1e-12 * direct.abs() + 1e-15, "{x}");
        }
    }

    #[test]
    fn slope_of_a_line() {
        let xs = [0.0f64, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        assert!((fit_slope(&xs, &ys) - 2.5).abs() < 1e-14);
    }
}

//! Convergence studies: errors against an oracle over dyadic resolutions and
//! the least-squares order.

use crate::error::{Error, Result};
use crate::scalar::{fit_slope, Real};

#[derive(Clone, Debug)]
pub struct StudyRow<T> {
    pub resolution: usize,
    pub h: T,
    pub error: T,
}

#[derive(Clone, Debug)]
pub struct StudyTable<T> {
    pub rows: Vec<StudyRow<T>>,
    /// Slope of `log error` against `log h`.
    pub order: T,
    /// Orders between successive rows.
    pub pairwise: Vec<T>,
}

/// Runs `run(resolution) -> (h, error)` on each resolution and fits the
/// order. Needs at least three distinct resolutions.
pub fn convergence_study<T: Real, F>(resolutions: &[usize], mut run: F) -> Result<StudyTable<T>>
where
    F: FnMut(usize) -> Result<(T, T)>,
{
    if resolutions.len() < 3 {
        return Err(Error::invalid("a convergence study needs at least three resolutions"));
    }
    let mut sorted = resolutions.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("non-distinct resolutions"));
    }
    let mut rows = Vec::with_capacity(resolutions.len());
    for &r in resolutions {
        let (h, error) = run(r)?;
        if !(error > T::zero() && h > T::zero()) {
            return Err(Error::invalid(format!("study at resolution {r} returned a non-positive error or mesh size")));
        }
        rows.push(StudyRow { resolution: r, h, error });
    }
    let lx: Vec<T> = rows.iter().map(|r| r.h.ln()).collect();
    let ly: Vec<T> = rows.iter().map(|r| r.error.ln()).collect();
    let order = fit_slope(&lx, &ly);
    let pairwise = rows.windows(2).map(|w| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln()).collect();
    Ok(StudyTable { rows, order, pairwise })
}

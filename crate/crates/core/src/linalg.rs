//! Small dense helpers shared by the numeric modules.

/// Inner product accumulated left to right.
///
/// Every pairwise statistic in the crate goes through this function, so the
/// summation order (and therefore the rounding) is identical everywhere.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

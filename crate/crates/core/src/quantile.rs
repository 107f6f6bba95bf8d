//! Empirical quantile functions on midpoint ranks.
//!
//! A sorted sample `x_(0) ≤ … ≤ x_(n-1)` places knot `i` at rank
//! `(i + 0.5) / n`. The quantile function interpolates linearly between
//! knots and is constant beyond the first and last one. Ranks are kept as
//! exact fractions so that evaluating a group's own quantile function at
//! its own knots returns the sample value bit-for-bit, and so that the
//! union of rank grids deduplicates exactly.

use std::cmp::Ordering;

/// Rank `num / den` in `(0, 1)`, stored exactly.
#[derive(Debug, Clone, Copy)]
pub struct Rank {
    num: u64,
    den: u64,
}

impl Rank {
    /// Midpoint rank of order statistic `i` (0-based) in a sample of size `n`.
    pub fn midpoint(i: usize, n: usize) -> Self {
        debug_assert!(i < n);
        Rank {
            num: 2 * i as u64 + 1,
            den: 2 * n as u64,
        }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Rank {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rank {}

impl PartialOrd for Rank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rank {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

/// Midpoint rank grid of a sample of size `n`.
pub fn rank_grid(n: usize) -> Vec<Rank> {
    (0..n).map(|i| Rank::midpoint(i, n)).collect()
}

/// Sorted, deduplicated union of the midpoint grids for the given sizes.
pub fn union_grid(sizes: &[usize]) -> Vec<Rank> {
    let mut all: Vec<Rank> = sizes.iter().flat_map(|&n| rank_grid(n)).collect();
    all.sort();
    all.dedup();
    all
}

/// Evaluates the interpolated quantile function of `sorted` at rank `u`.
///
/// `sorted` must be non-empty and ascending.
pub fn quantile_at(sorted: &[f64], u: Rank) -> f64 {
    let m = sorted.len() as u128;
    assert!(m > 0, "quantile of an empty sample");
    // position p = u*m - 1/2 = (2*num*m - den) / (2*den)
    let two_den = 2 * u.den as u128;
    let scaled = 2 * u.num as u128 * m;
    if scaled <= u.den as u128 {
        return sorted[0];
    }
    let numer = scaled - u.den as u128;
    let j = (numer / two_den) as usize;
    let rem = numer % two_den;
    if j + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    if rem == 0 {
        return sorted[j];
    }
    let frac = rem as f64 / two_den as f64;
    sorted[j] + frac * (sorted[j + 1] - sorted[j])
}

/// Ascending copy of `values`; ties keep their input order.
pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

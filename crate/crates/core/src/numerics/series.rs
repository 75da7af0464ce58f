//! Truncation of infinite sums over geometric cluster-size weights. All the
//! analytic formulas are series of the form sum_k w(k) term(k) where the
//! weight tail is geometric, so a caller-provided tail bound certifies the
//! truncation error.

use crate::{Error, Result};

/// Hard cap on series length; hitting it means the tail bound is not falling.
pub const SERIES_TERM_CAP: u64 = 10_000_000;

/// Sum `term(k)` for k = 1, 2, ... until `tail_bound(k) <= eps`, where
/// `tail_bound(k)` bounds |sum_{j>k} term(j)| and is monotone decreasing.
/// Returns the partial sum and the last index included.
pub fn truncate_geometric_series(
    term: impl Fn(u64) -> f64,
    tail_bound: impl Fn(u64) -> f64,
    eps: f64,
) -> Result<(f64, u64)> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("series eps must be positive, got {eps}")));
    }
    let mut sum = 0.0;
    for k in 1..=SERIES_TERM_CAP {
        sum += term(k);
        if tail_bound(k) <= eps {
            return Ok((sum, k));
        }
    }
    Err(Error::SeriesCap { partial: sum })
}

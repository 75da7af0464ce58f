//! Materialized highway lanes: Poisson vehicle placement and the gap-based
//! partition into clusters.

use crate::numerics::{sample_exponential, RngStream};
use crate::{Error, Result};

/// A maximal run of vehicles with successive spacings <= r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    /// Position of the westmost (trailing) vehicle.
    pub start: f64,
    /// Position of the eastmost (leading) vehicle.
    pub end: f64,
    pub size: u32,
}

impl Cluster {
    pub fn extent(&self) -> f64 {
        self.end - self.start
    }
}

/// One lane of vehicle positions on [0, length]: a Poisson process of rate
/// `lambda` built from successive Exp(lambda) spacings starting at the origin.
/// The draw that first crosses `length` is consumed, which keeps the draw
/// sequence identical to the streaming cluster generator.
pub fn generate_lane(rng: &mut RngStream, lambda: f64, length: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be > 0, got {lambda}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Config(format!("lane length must be > 0, got {length}")));
    }
    let expected = (lambda * length * 1.1) as usize + 16;
    let mut positions = Vec::with_capacity(expected.min(1 << 26));
    let mut pos = 0.0;
    loop {
        pos += sample_exponential(rng, lambda)?;
        if pos > length {
            break;
        }
        positions.push(pos);
    }
    Ok(positions)
}

/// Partition ascending `positions` into clusters: a new cluster starts
/// whenever the spacing to the previous vehicle exceeds `r`.
pub fn partition_clusters(positions: &[f64], r: f64) -> Vec<Cluster> {
    debug_assert!(r > 0.0);
    let mut clusters = Vec::new();
    let mut iter = positions.iter().copied();
    let Some(first) = iter.next() else {
        return clusters;
    };
    let mut current = Cluster {
        start: first,
        end: first,
        size: 1,
    };
    for p in iter {
        debug_assert!(p >= current.end, "positions must be ascending");
        if p - current.end > r {
            clusters.push(current);
            current = Cluster { start: p, end: p, size: 1 };
        } else {
            current.end = p;
            current.size += 1;
        }
    }
    clusters.push(current);
    clusters
}

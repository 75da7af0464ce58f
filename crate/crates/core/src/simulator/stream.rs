//! Cluster sequences for the packet walk: an O(1)-memory streaming generator
//! and an adapter over a materialized lane. Both present clusters in road
//! order as (size, preceding excess gap) pairs; the streaming generator draws
//! raw vehicle spacings in exactly the order of
//! [`generate_lane`](super::road::generate_lane) followed by
//! [`partition_clusters`](super::road::partition_clusters), so with a shared
//! seed the two sources agree entry for entry until the materialized road
//! runs out.

use super::road::Cluster;
use crate::numerics::{sample_exponential, RngStream};
use crate::Result;

/// One cluster as the walk sees it. `gap` is the excess spacing (beyond the
/// clustering radius r) separating it from the previous cluster; for the very
/// first entry it is the distance from the road origin instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterEntry {
    pub size: u32,
    pub gap: f64,
}

/// Road-ordered supplier of clusters. `None` means the road ended.
pub trait ClusterSource {
    fn next_cluster(&mut self) -> Result<Option<ClusterEntry>>;
}

/// Unbounded lane streamed cluster by cluster: vehicle spacings are drawn
/// one at a time and folded into clusters on the fly.
pub struct ClusterStream<'a> {
    rng: &'a mut RngStream,
    lambda: f64,
    r: f64,
    /// Gap leading to the next cluster's first vehicle (excess form after the
    /// first entry), carried across calls.
    pending_gap: Option<f64>,
}

impl<'a> ClusterStream<'a> {
    pub fn new(rng: &'a mut RngStream, lambda: f64, r: f64) -> Self {
        ClusterStream { rng, lambda, r, pending_gap: None }
    }
}

impl ClusterSource for ClusterStream<'_> {
    fn next_cluster(&mut self) -> Result<Option<ClusterEntry>> {
        let gap = match self.pending_gap {
            Some(g) => g,
            // First vehicle sits Exp(lambda) from the origin.
            None => sample_exponential(self.rng, self.lambda)?,
        };
        let mut size = 1u32;
        loop {
            let spacing = sample_exponential(self.rng, self.lambda)?;
            if spacing > self.r {
                self.pending_gap = Some(spacing - self.r);
                return Ok(Some(ClusterEntry { size, gap }));
            }
            size += 1;
        }
    }
}

/// Adapter over a partitioned lane.
pub struct MaterializedClusters<'a> {
    clusters: &'a [Cluster],
    r: f64,
    index: usize,
}

impl<'a> MaterializedClusters<'a> {
    pub fn new(clusters: &'a [Cluster], r: f64) -> Self {
        MaterializedClusters { clusters, r, index: 0 }
    }
}

impl ClusterSource for MaterializedClusters<'_> {
    fn next_cluster(&mut self) -> Result<Option<ClusterEntry>> {
        let Some(c) = self.clusters.get(self.index) else {
            return Ok(None);
        };
        let gap = if self.index == 0 {
            c.start
        } else {
            c.start - self.clusters[self.index - 1].end - self.r
        };
        self.index += 1;
        Ok(Some(ClusterEntry { size: c.size, gap }))
    }
}

/// Draw a cluster size from the geometric law P(N = k) = (1-q) q^(k-1) by
/// inversion; q >= 1 (numerically saturated density) pins the draw at the
/// largest representable size.
pub fn draw_cluster_size(rng: &mut RngStream, q: f64) -> u32 {
    debug_assert!((0.0..=1.0).contains(&q));
    if q <= 0.0 {
        return 1;
    }
    if q >= 1.0 {
        return crate::channel::GAIN_TABLE_CAP;
    }
    let u = rng.next_f64();
    1 + ((1.0 - u).ln() / q.ln()).floor() as u32
}

/// Exp(rate) conditioned on being at most `upper` (inverse-CDF draw).
pub fn sample_truncated_exponential(rng: &mut RngStream, rate: f64, upper: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(crate::Error::Domain(format!("rate must be > 0, got {rate}")));
    }
    if !(upper > 0.0) {
        return Err(crate::Error::Domain(format!("upper must be > 0, got {upper}")));
    }
    let u = rng.next_f64();
    Ok(-(1.0 - u * (1.0 - (-rate * upper).exp())).ln() / rate)
}

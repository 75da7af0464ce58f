//! Monte-Carlo estimation of the information propagation speed.
//!
//! The walk kernel advances a packet cluster by cluster ([`kernel`]); roads
//! come either from a streaming gap source or from materialized lanes
//! ([`road`], [`stream`]); [`measure_ips`] runs independent replicates in
//! parallel and combines them with a ratio estimator.

pub mod kernel;
pub mod road;
pub mod stream;

use rayon::prelude::*;

pub use kernel::{BlockScenario, CycleRecord, SimMode, StopRule, WalkOutcome, WalkParams};
pub use road::{generate_lane, partition_clusters, Cluster};
pub use stream::{ClusterEntry, ClusterSource, ClusterStream, MaterializedClusters};

use crate::analytics::{self, ProtocolConfig, TrafficConfig};
use crate::channel::RangeModel;
use crate::numerics::RngStream;
use crate::{Error, Result};

/// Simulation controls. Model and traffic parameters live in [`RangeModel`],
/// [`TrafficConfig`] and [`ProtocolConfig`]; this struct only decides how the
/// estimate is produced.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub mode: SimMode,
    pub scenario: BlockScenario,
    pub seed: u64,
    pub replicates: u32,
    /// Per-replicate stop rule; `None` derives a span from the analytic
    /// cycle length (twenty expected cycles, at least 2 km).
    pub stop: Option<StopRule>,
    /// Materialized road length per lane in meters (physical scenario only);
    /// `None` derives it from the stop rule.
    pub road_length: Option<f64>,
    /// Opposing clusters examined per block before a replicate is censored.
    pub max_scan_clusters: u64,
    /// Optional wall-time ceiling per replicate in simulated seconds.
    pub time_budget: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mode: SimMode::DeterministicRange,
            scenario: BlockScenario::Renewal,
            seed: 0x5EED,
            replicates: 20,
            stop: None,
            road_length: None,
            max_scan_clusters: 10_000_000,
            time_budget: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if self.max_scan_clusters == 0 {
            return Err(Error::Config("max_scan_clusters must be >= 1".into()));
        }
        if let Some(StopRule::Cycles(0)) = self.stop {
            return Err(Error::Config("stop rule needs at least one cycle".into()));
        }
        if let Some(StopRule::Span(d)) = self.stop {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("span must be > 0, got {d}")));
            }
        }
        if let Some(l) = self.road_length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("road length must be > 0, got {l}")));
            }
        }
        if let Some(t) = self.time_budget {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("time budget must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Per-replicate aggregates (cycle-level samples stay inside the kernel; rerun
/// it directly when a distributional harvest is needed).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ReplicateRecord {
    pub replicate: u32,
    pub cycles: u64,
    /// Excess distance over completed cycles (m).
    pub distance: f64,
    /// Waiting plus terminal-crossing decode time over completed cycles (s).
    pub renewal_time: f64,
    /// Completed-cycle distance plus the open partial cycle (m).
    pub wall_distance: f64,
    /// Waiting plus all decode time, including the open partial cycle (s).
    pub wall_time: f64,
    pub wait: f64,
    /// Decode time of every hop, including the open partial cycle (s).
    pub radio: f64,
    pub crossings: u64,
    pub hops: u64,
    pub bridged: u64,
    pub blocked: u64,
    pub censored: bool,
    pub road_exhausted: bool,
}

/// Combined Monte-Carlo estimate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IpsEstimate {
    /// Propagation speed under renewal accounting (m/s in the co-moving,
    /// excess-distance frame) — the figure comparable to the closed form.
    pub v_p: f64,
    /// Propagation speed on the wall clock (every hop charged).
    pub v_p_wall: f64,
    /// Linearized standard error of `v_p` across replicates.
    pub std_error: f64,
    pub mean_wait: f64,
    pub mean_cycle_distance: f64,
    /// Mean decode time per crossing (s).
    pub mean_crossing_radio: f64,
    pub bridged_fraction: f64,
    pub hops_per_crossing: f64,
    pub replicates: u32,
    /// Replicates dropped for hitting a scan or time ceiling.
    pub censored: u32,
    pub cycles: u64,
    pub records: Vec<ReplicateRecord>,
}

fn default_span(model: &RangeModel, traffic: &TrafficConfig, protocol: &ProtocolConfig) -> f64 {
    let e_d = analytics::analytic_ips(model, traffic, protocol)
        .map(|b| b.e_d)
        .unwrap_or(1.0 / traffic.lambda);
    (20.0 * e_d).clamp(2_000.0, 1.0e7)
}

fn run_replicate(
    params: &WalkParams,
    sim: &SimConfig,
    idx: u32,
    span_hint: f64,
) -> Result<WalkOutcome> {
    let mut road_rng = RngStream::new(sim.seed, 2 * idx as u64);
    let mut walk_rng = RngStream::new(sim.seed, 2 * idx as u64 + 1);
    match sim.scenario {
        BlockScenario::Renewal => {
            let mut source = ClusterStream::new(&mut road_rng, params.traffic.lambda, params.model.r);
            kernel::renewal_walk(params, &mut source, &mut walk_rng)
        }
        BlockScenario::Coherent => {
            let lam = params.traffic.lambda;
            let r = params.model.r;
            let length = sim.road_length.unwrap_or_else(|| {
                // Excess span to real length (factor e^{lambda r}), a margin
                // for span overshoot, and slack for lead-ins and extents.
                (1.4 * span_hint * (lam * r).exp() + 2.0 * (2.0 * r + 10.0 / lam))
                    .clamp(1_000.0 / lam, 6.0e7)
            });
            let east = road::generate_lane(&mut road_rng, lam, length)?;
            let west = road::generate_lane(&mut road_rng, lam, length)?;
            let east = road::partition_clusters(&east, r);
            let west = road::partition_clusters(&west, r);
            kernel::coherent_walk(params, &east, &west, &mut walk_rng)
        }
    }
}

/// Estimate the propagation speed from `sim.replicates` independent walks.
///
/// Replicates are seeded deterministically from `sim.seed` (streams `2j`
/// for the road and `2j + 1` for the walk of replicate `j`), so results are
/// byte-for-byte reproducible regardless of thread count. Censored replicates
/// are excluded from the estimate and counted; if every replicate censors the
/// estimation fails.
pub fn measure_ips(
    model: &RangeModel,
    traffic: &TrafficConfig,
    protocol: &ProtocolConfig,
    sim: &SimConfig,
) -> Result<IpsEstimate> {
    traffic.validate()?;
    protocol.validate()?;
    sim.validate()?;

    let span_hint = match sim.stop {
        Some(StopRule::Span(d)) => d,
        Some(StopRule::Cycles(_)) => default_span(model, traffic, protocol),
        None => default_span(model, traffic, protocol),
    };
    let stop = sim.stop.unwrap_or(StopRule::Span(span_hint));
    let params = WalkParams {
        model,
        traffic: *traffic,
        protocol: *protocol,
        mode: sim.mode,
        stop,
        max_scan_clusters: sim.max_scan_clusters,
        time_budget: sim.time_budget,
    };

    let outcomes: Vec<WalkOutcome> = (0..sim.replicates)
        .into_par_iter()
        .map(|j| run_replicate(&params, sim, j, span_hint))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(outcomes.len());
    for (j, o) in outcomes.iter().enumerate() {
        records.push(ReplicateRecord {
            replicate: j as u32,
            cycles: o.cycles.len() as u64,
            distance: o.total_distance(),
            renewal_time: o.renewal_time(),
            wall_distance: o.total_distance() + o.open_distance,
            wall_time: o.wall_time() + o.open_radio,
            wait: o.cycles.iter().map(|c| c.wait).sum(),
            radio: o.cycles.iter().map(|c| c.radio).sum::<f64>() + o.open_radio,
            crossings: o.crossings() + o.open_crossings as u64,
            hops: o.hops() + o.open_hops as u64,
            bridged: o.bridged,
            blocked: o.blocked,
            censored: o.censored,
            road_exhausted: o.road_exhausted,
        });
    }

    let used: Vec<&ReplicateRecord> = records
        .iter()
        .filter(|r| !r.censored && (r.cycles > 0 || r.crossings > 0))
        .collect();
    let censored = records.iter().filter(|r| r.censored).count() as u32;
    if used.is_empty() {
        return Err(Error::Estimation(
            "no replicate advanced (all censored or road too short)".into(),
        ));
    }

    let dist: f64 = used.iter().map(|r| r.distance).sum();
    let t_renewal: f64 = used.iter().map(|r| r.renewal_time).sum();
    let wall_dist: f64 = used.iter().map(|r| r.wall_distance).sum();
    let t_wall: f64 = used.iter().map(|r| r.wall_time).sum();
    let cycles: u64 = used.iter().map(|r| r.cycles).sum();
    let crossings: u64 = used.iter().map(|r| r.crossings).sum();
    let hops: u64 = used.iter().map(|r| r.hops).sum();
    let wait: f64 = used.iter().map(|r| r.wait).sum();
    let radio: f64 = used.iter().map(|r| r.radio).sum();
    let bridged: u64 = used.iter().map(|r| r.bridged).sum();
    let blocked: u64 = used.iter().map(|r| r.blocked).sum();
    if !(t_wall > 0.0) {
        return Err(Error::Estimation("walks accumulated no elapsed time".into()));
    }

    // Renewal-clock ratio over completed cycles; NaN (not an error) when the
    // regime is so dense that no walk ever blocked.
    let v_p = if t_renewal > 0.0 { dist / t_renewal } else { f64::NAN };
    // Ratio-estimator standard error: residuals of per-replicate distance
    // against the pooled rate, scaled by total time.
    let resid_sq: f64 = used
        .iter()
        .map(|r| {
            let e = r.distance - v_p * r.renewal_time;
            e * e
        })
        .sum();
    let std_error = if used.len() > 1 && t_renewal > 0.0 {
        resid_sq.sqrt() / t_renewal
    } else {
        f64::NAN
    };

    let per_cycle = |num: f64| if cycles > 0 { num / cycles as f64 } else { f64::NAN };
    Ok(IpsEstimate {
        v_p,
        v_p_wall: wall_dist / t_wall,
        std_error,
        mean_wait: per_cycle(wait),
        mean_cycle_distance: per_cycle(dist),
        mean_crossing_radio: radio / crossings as f64,
        bridged_fraction: bridged as f64 / (bridged + blocked) as f64,
        hops_per_crossing: hops as f64 / crossings as f64,
        replicates: sim.replicates,
        censored,
        cycles,
        records,
    })
}

//! The packet walk: advance the frontier cluster by cluster, resolve blocks
//! through opposing-lane helpers, and account distance, waiting and decode
//! time per renewal cycle.
//!
//! Distances live in the excess-gap metric (spacing beyond the clustering
//! radius): gaps are Exp(lambda), thresholds are r F(.), and the propagation
//! speed divides excess distance by elapsed time in the eastbound co-moving
//! frame.

use super::road::Cluster;
use super::stream::{draw_cluster_size, sample_truncated_exponential, ClusterSource};
use crate::analytics::{ProtocolConfig, TrafficConfig};
use crate::channel::RangeModel;
use crate::numerics::{sample_exponential, RngStream};
use crate::{Error, Result};

/// How per-hop decode time is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SimMode {
    /// Attempt counts drawn from the geometric law with the analytic
    /// per-attempt outage (fast; shares the outage model with the closed
    /// forms).
    DeterministicRange,
    /// Every attempt is a fresh fading draw on the actual link (slower;
    /// independent of the normal approximation). Singleton senders transmit
    /// on one antenna only.
    ChannelSampled,
}

/// How blocks are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BlockScenario {
    /// Renewal-faithful: at each block the gap ahead is redrawn from the
    /// stationary unbridged-gap law and the opposing lane is scanned as a
    /// fresh marked Poisson stream. Matches the closed-form cycle structure
    /// exactly.
    Renewal,
    /// Physical: both lanes are materialized once and opposing clusters
    /// drift past at closing speed 2v; blocks wait for the first adequate
    /// real cluster. Carries the gap-selection bias of a real walk.
    Coherent,
}

/// Walk termination.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum StopRule {
    /// Stop after this many completed block-to-block cycles.
    Cycles(u64),
    /// Stop at the first cycle completion with this much distance covered (m).
    Span(f64),
}

/// Everything a walk needs besides the road and the dice.
#[derive(Clone, Copy)]
pub struct WalkParams<'a> {
    pub model: &'a RangeModel,
    pub traffic: TrafficConfig,
    pub protocol: ProtocolConfig,
    pub mode: SimMode,
    pub stop: StopRule,
    /// Opposing clusters examined per block before the walk is censored.
    pub max_scan_clusters: u64,
    /// Optional ceiling on accumulated (wait + decode) seconds; exceeding it
    /// censors the walk.
    pub time_budget: Option<f64>,
}

/// One completed block-to-block cycle.
#[derive(Debug, Clone, Copy)]
pub struct CycleRecord {
    /// Excess distance advanced over the cycle, including the blocked gap.
    pub distance: f64,
    /// Waiting time at the terminal block (s).
    pub wait: f64,
    /// Decode time of every hop in the cycle (s).
    pub radio: f64,
    /// Decode time of the terminal relayed crossing alone (s).
    pub blocked_radio: f64,
    /// Crossings in the cycle (bridged ones plus the terminal crossing).
    pub crossings: u32,
    pub hops: u32,
    /// The gap resolved at the terminal block.
    pub blocked_gap: f64,
    /// Receiving-cluster size at the terminal block.
    pub blocked_size: u32,
}

/// Everything a walk produces.
#[derive(Debug, Clone, Default)]
pub struct WalkOutcome {
    pub cycles: Vec<CycleRecord>,
    /// Gap crossings that bridged immediately (never part of a block).
    pub bridged: u64,
    /// Blocks encountered (equals completed cycles unless censored mid-block).
    pub blocked: u64,
    /// True when a scan or time ceiling fired; collected cycles remain valid.
    pub censored: bool,
    /// True when a materialized road ran out of clusters.
    pub road_exhausted: bool,
    /// Partial cycle in progress when the walk ended. In dense traffic blocks
    /// are essentially never reached, so wall-clock accounting must keep this
    /// exposure; the renewal estimator ignores it (no completed wait).
    pub open_distance: f64,
    pub open_radio: f64,
    pub open_crossings: u32,
    pub open_hops: u32,
}

impl WalkOutcome {
    pub fn total_distance(&self) -> f64 {
        self.cycles.iter().map(|c| c.distance).sum()
    }

    /// Cycle time under the renewal accounting: waiting plus the terminal
    /// crossing's decode time (the closed forms charge exactly one crossing
    /// per cycle).
    pub fn renewal_time(&self) -> f64 {
        self.cycles.iter().map(|c| c.wait + c.blocked_radio).sum()
    }

    /// Cycle time on the wall clock: waiting plus every hop's decode time.
    pub fn wall_time(&self) -> f64 {
        self.cycles.iter().map(|c| c.wait + c.radio).sum()
    }

    pub fn crossings(&self) -> u64 {
        self.cycles.iter().map(|c| c.crossings as u64).sum()
    }

    pub fn hops(&self) -> u64 {
        self.cycles.iter().map(|c| c.hops as u64).sum()
    }
}

/// Decode time of one hop: repeated attempts every tau seconds until the
/// receiving cluster decodes.
fn hop_time(
    params: &WalkParams,
    sender_size: u32,
    receiver_size: u32,
    distance: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    let tau = params.protocol.tau;
    match params.mode {
        SimMode::DeterministicRange => {
            let p_o = if distance <= 0.0 {
                0.0
            } else {
                params.model.outage_probability(2, receiver_size, distance)?
            };
            Ok(tau * sample_attempts(rng, p_o) as f64)
        }
        SimMode::ChannelSampled => {
            let n_tx = if sender_size >= 2 { 2 } else { 1 };
            let mut attempts = 1u64;
            while params.model.sample_outage(n_tx, receiver_size, distance, rng)? {
                attempts += 1;
                if attempts > 10_000_000 {
                    return Err(Error::Estimation(
                        "link failed to decode within 10^7 attempts".into(),
                    ));
                }
            }
            Ok(tau * attempts as f64)
        }
    }
}

/// Number of attempts until first success when each attempt independently
/// fails with probability `p_fail` (geometric, inverse-CDF draw).
pub fn sample_attempts(rng: &mut RngStream, p_fail: f64) -> u64 {
    debug_assert!((0.0..1.0).contains(&p_fail) || p_fail == 0.0);
    if p_fail <= 0.0 {
        return 1;
    }
    let u = rng.next_f64();
    1 + ((1.0 - u).ln() / p_fail.ln()).floor() as u64
}

/// Scan opposing clusters until one of size >= `n_eff` appears. Returns the
/// scan distance beyond the first cluster (zero when it already qualifies),
/// the qualifying cluster's size, and the number of clusters examined —
/// or `None` when the ceiling fired.
pub fn westbound_scan(
    rng: &mut RngStream,
    q: f64,
    lambda: f64,
    n_eff: u32,
    max_clusters: u64,
) -> Result<Option<(f64, u32, u64)>> {
    let mut scanned = 1u64;
    let mut extra = 0.0;
    let mut size = draw_cluster_size(rng, q);
    while size < n_eff {
        if scanned >= max_clusters {
            return Ok(None);
        }
        extra += sample_exponential(rng, lambda)?;
        size = draw_cluster_size(rng, q);
        scanned += 1;
    }
    Ok(Some((extra, size, scanned)))
}

/// Run the renewal-scenario walk over `source` with `rng` supplying every
/// draw that is not part of the road itself (coins, helpers, redraws, decode
/// attempts).
pub fn renewal_walk(
    params: &WalkParams,
    source: &mut dyn ClusterSource,
    rng: &mut RngStream,
) -> Result<WalkOutcome> {
    params.traffic.validate()?;
    params.protocol.validate()?;
    let m = params.model;
    let (lam, v) = (params.traffic.lambda, params.traffic.v);
    let q = 1.0 - (-lam * m.r).exp();

    let mut out = WalkOutcome::default();
    let Some(first) = source.next_cluster()? else {
        out.road_exhausted = true;
        return Ok(out);
    };
    let mut sender = first.size;

    let mut c_dist = 0.0;
    let mut c_radio = 0.0;
    let mut c_cross = 0u32;
    let mut c_hops = 0u32;
    let mut total_dist = 0.0;
    let mut total_time = 0.0;

    'walk: loop {
        let Some(entry) = source.next_cluster()? else {
            out.road_exhausted = true;
            break;
        };
        let (k_recv, x) = (entry.size, entry.gap);

        // Equal-weight mixture: direct reception, or relaying through one
        // opposing cluster that doubles as a second array.
        let relay = if rng.fair_coin() {
            None
        } else {
            Some(draw_cluster_size(rng, q))
        };
        let reach = match relay {
            None => m.r * m.gain(k_recv),
            Some(n_w) => m.r * (m.gain(n_w) + m.gain(k_recv)),
        };

        if x <= reach {
            out.bridged += 1;
            let radio = match relay {
                // The gap itself is the link length (Exp conditioned in range).
                None => hop_time(params, sender, k_recv, x, rng)?,
                Some(n_w) => {
                    let i1 = sample_truncated_exponential(rng, lam, m.r * m.gain(n_w))?;
                    let i2 = sample_truncated_exponential(rng, lam, m.r * m.gain(k_recv))?;
                    hop_time(params, sender, n_w, i1, rng)?
                        + hop_time(params, n_w, k_recv, i2, rng)?
                }
            };
            c_dist += x;
            c_radio += radio;
            c_cross += 1;
            c_hops += if relay.is_none() { 1 } else { 2 };
            total_time += radio;
            sender = k_recv;
            // A span stop must be able to fire mid-cycle: in dense traffic
            // blocks may be practically unreachable.
            if let StopRule::Span(d) = params.stop {
                if total_dist + c_dist >= d {
                    break 'walk;
                }
            }
        } else {
            // Blocked. The stationary law of the gap being waited out is the
            // unbridged-gap mixture; draw it fresh so cycles reproduce the
            // renewal equations rather than the walk's depth-biased pick.
            out.blocked += 1;
            let k_b = draw_cluster_size(rng, q);
            let x_b = m.r * m.gain(k_b) + sample_exponential(rng, lam)?;
            let need = m.min_bridge_cluster(k_b, x_b);
            let n_eff = if need.capped {
                m.bridge_size_cap
            } else {
                need.n.min(m.bridge_size_cap)
            };
            let lead_in = sample_exponential(rng, lam)?;
            let Some((extra, s_w, _)) =
                westbound_scan(rng, q, lam, n_eff, params.max_scan_clusters)?
            else {
                out.censored = true;
                break;
            };
            let wait = (x_b + lead_in + extra) / (2.0 * v);
            let i1 = sample_truncated_exponential(rng, lam, m.r * m.gain(s_w))?;
            let i2 = sample_truncated_exponential(rng, lam, m.r * m.gain(k_b))?;
            let blocked_radio =
                hop_time(params, sender, s_w, i1, rng)? + hop_time(params, s_w, k_b, i2, rng)?;

            c_dist += x_b;
            c_radio += blocked_radio;
            c_cross += 1;
            c_hops += 2;
            out.cycles.push(CycleRecord {
                distance: c_dist,
                wait,
                radio: c_radio,
                blocked_radio,
                crossings: c_cross,
                hops: c_hops,
                blocked_gap: x_b,
                blocked_size: k_b,
            });
            total_dist += c_dist;
            total_time += wait + blocked_radio;
            sender = k_b;
            c_dist = 0.0;
            c_radio = 0.0;
            c_cross = 0;
            c_hops = 0;

            match params.stop {
                StopRule::Cycles(n) if out.cycles.len() as u64 >= n => break,
                StopRule::Span(d) if total_dist >= d => break,
                _ => {}
            }
        }
        if let Some(budget) = params.time_budget {
            if total_time > budget {
                out.censored = true;
                break;
            }
        }
    }
    out.open_distance = c_dist;
    out.open_radio = c_radio;
    out.open_crossings = c_cross;
    out.open_hops = c_hops;
    Ok(out)
}

/// Run the physical-scenario walk over materialized lanes. Opposing clusters
/// drift west at the closing speed 2v as wall time accumulates; a block waits
/// until the first adequate opposing cluster's leading edge crosses the gap.
pub fn coherent_walk(
    params: &WalkParams,
    east: &[Cluster],
    west: &[Cluster],
    rng: &mut RngStream,
) -> Result<WalkOutcome> {
    params.traffic.validate()?;
    params.protocol.validate()?;
    let m = params.model;
    let (lam, v) = (params.traffic.lambda, params.traffic.v);
    let closing = 2.0 * v;

    let mut out = WalkOutcome::default();
    if east.is_empty() {
        out.road_exhausted = true;
        return Ok(out);
    }
    let mut sender = east[0].size;
    let mut clock = 0.0; // wall time since the walk began
    // Opposing clusters whose leading edge started west of this index's have
    // already drifted past every position of interest.
    let mut west_cursor = 0usize;

    let mut c_dist = 0.0;
    let mut c_radio = 0.0;
    let mut c_cross = 0u32;
    let mut c_hops = 0u32;
    let mut total_dist = 0.0;
    let mut stopped = false;

    'walk: for i in 1..east.len() {
        let a = east[i - 1].end;
        let b = east[i].start;
        let k_recv = east[i].size;
        let x = b - a - m.r; // excess gap

        // Direct reception?
        if x <= m.r * m.gain(k_recv) {
            out.bridged += 1;
            let radio = hop_time(params, sender, k_recv, x, rng)?;
            clock += radio;
            c_dist += x;
            c_radio += radio;
            c_cross += 1;
            c_hops += 1;
            sender = k_recv;
            if let StopRule::Span(d) = params.stop {
                if total_dist + c_dist >= d {
                    stopped = true;
                    break 'walk;
                }
            }
            continue;
        }

        // A relay currently inside the gap? Leading edges drift as
        // pos(t) = start - closing * t.
        let drift = closing * clock;
        let mut relay: Option<u32> = None;
        for c in west[west_cursor..].iter() {
            let lead = c.start - drift;
            if lead <= a {
                west_cursor += 1;
                continue;
            }
            if lead >= b {
                break;
            }
            if x <= m.r * (m.gain(c.size) + m.gain(k_recv)) {
                relay = Some(c.size);
                break;
            }
        }
        if let Some(n_w) = relay {
            out.bridged += 1;
            let i1 = sample_truncated_exponential(rng, lam, m.r * m.gain(n_w))?;
            let i2 = sample_truncated_exponential(rng, lam, m.r * m.gain(k_recv))?;
            let radio =
                hop_time(params, sender, n_w, i1, rng)? + hop_time(params, n_w, k_recv, i2, rng)?;
            clock += radio;
            c_dist += x;
            c_radio += radio;
            c_cross += 1;
            c_hops += 2;
            sender = k_recv;
            if let StopRule::Span(d) = params.stop {
                if total_dist + c_dist >= d {
                    stopped = true;
                    break 'walk;
                }
            }
            continue;
        }

        // Blocked: wait for the first adequate opposing cluster approaching
        // from east of the gap to drift across it.
        out.blocked += 1;
        let need = m.min_bridge_cluster(k_recv, x);
        let n_eff = if need.capped {
            m.bridge_size_cap
        } else {
            need.n.min(m.bridge_size_cap)
        };
        let mut resolved: Option<(f64, u32)> = None;
        for c in west[west_cursor..].iter() {
            let lead = c.start - drift;
            if lead >= b && c.size >= n_eff {
                // It bridges once its leading edge reaches the gap's west end.
                resolved = Some(((lead - a) / closing, c.size));
                break;
            }
        }
        let Some((wait, s_w)) = resolved else {
            out.censored = true; // opposing lane exhausted
            break;
        };
        clock += wait;
        let i1 = sample_truncated_exponential(rng, lam, m.r * m.gain(s_w))?;
        let i2 = sample_truncated_exponential(rng, lam, m.r * m.gain(k_recv))?;
        let blocked_radio =
            hop_time(params, sender, s_w, i1, rng)? + hop_time(params, s_w, k_recv, i2, rng)?;
        clock += blocked_radio;

        c_dist += x;
        c_radio += blocked_radio;
        c_cross += 1;
        c_hops += 2;
        out.cycles.push(CycleRecord {
            distance: c_dist,
            wait,
            radio: c_radio,
            blocked_radio,
            crossings: c_cross,
            hops: c_hops,
            blocked_gap: x,
            blocked_size: k_recv,
        });
        total_dist += c_dist;
        sender = k_recv;
        c_dist = 0.0;
        c_radio = 0.0;
        c_cross = 0;
        c_hops = 0;

        match params.stop {
            StopRule::Cycles(n) if out.cycles.len() as u64 >= n => {
                stopped = true;
                break 'walk;
            }
            StopRule::Span(d) if total_dist >= d => {
                stopped = true;
                break 'walk;
            }
            _ => {}
        }
        if let Some(budget) = params.time_budget {
            if clock > budget {
                out.censored = true;
                break 'walk;
            }
        }
    }
    if !out.censored && !stopped {
        out.road_exhausted = true;
    }
    out.open_distance = c_dist;
    out.open_radio = c_radio;
    out.open_crossings = c_cross;
    out.open_hops = c_hops;
    Ok(out)
}

//! Python bindings for the highway information-propagation-speed toolkit.
//!
//! The module exposes the radio/range model as a `Channel` class plus
//! module-level functions for the closed-form pipeline and the Monte-Carlo
//! simulator. Configuration errors surface as `ValueError`; numeric and
//! estimation failures surface as `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use ips_core::channel::{mc_outage, ChannelConfig, RangeModel, DEFAULT_BRIDGE_SIZE_CAP};
use ips_core::{
    analytics, simulator, BlockScenario, ProtocolConfig, RngStream, SimConfig, SimMode, StopRule,
    TrafficConfig,
};

fn to_py_err(e: ips_core::Error) -> PyErr {
    match e {
        ips_core::Error::Config(_) | ips_core::Error::Domain(_) | ips_core::Error::Degenerate(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Radio channel plus the derived range model: single-vehicle range `r`,
/// the array gain `F(n)`, and outage probabilities under selection combining.
#[pyclass(frozen)]
struct Channel {
    model: RangeModel,
}

fn traffic(lam: f64, v: f64) -> TrafficConfig {
    TrafficConfig { lambda: lam, v }
}

#[pymethods]
impl Channel {
    /// Build a channel. Exactly one of `range_target` (meters, solves for
    /// transmit power) or `p_t` (watts) may be given; with neither, the
    /// single-vehicle range defaults to 25 m.
    #[new]
    #[pyo3(signature = (
        k_factor = 10.0,
        delta = 2.0,
        range_target = None,
        p_t = None,
        p_min = 1.0,
        p_out_target = 0.01,
        noise_psd = 1e-12,
        bridge_size_cap = DEFAULT_BRIDGE_SIZE_CAP,
        cooperative = true,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        k_factor: f64,
        delta: f64,
        range_target: Option<f64>,
        p_t: Option<f64>,
        p_min: f64,
        p_out_target: f64,
        noise_psd: f64,
        bridge_size_cap: u32,
        cooperative: bool,
    ) -> PyResult<Self> {
        let base = ChannelConfig {
            k_factor,
            delta,
            p_t: p_t.unwrap_or(1.0),
            p_min,
            p_out_target,
            noise_psd,
        };
        let config = match (p_t, range_target) {
            (Some(_), Some(_)) => {
                return Err(PyValueError::new_err(
                    "set only one of p_t and range_target",
                ))
            }
            (Some(_), None) => base,
            (None, target) => base
                .with_range_target(target.unwrap_or(25.0))
                .map_err(to_py_err)?,
        };
        let model = if cooperative {
            RangeModel::build(config, bridge_size_cap)
        } else {
            RangeModel::non_cooperative(config, bridge_size_cap)
        }
        .map_err(to_py_err)?;
        Ok(Channel { model })
    }

    /// Single-vehicle (1 tx, 1 rx) range in meters.
    #[getter]
    fn r(&self) -> f64 {
        self.model.r
    }

    /// Transmit power in watts (solved when built from a range target).
    #[getter]
    fn p_t(&self) -> f64 {
        self.model.config.p_t
    }

    #[getter]
    fn bridge_size_cap(&self) -> u32 {
        self.model.bridge_size_cap
    }

    #[getter]
    fn cooperative(&self) -> bool {
        !self.model.non_cooperative
    }

    /// Array gain F(n): range multiplier for 2 transmitters and n receivers
    /// relative to the single-vehicle range (identically 1 when the channel
    /// is non-cooperative).
    fn gain(&self, n: u32) -> f64 {
        self.model.gain(n)
    }

    /// Extended one-hop range r * F(n) in meters.
    fn mimo_range(&self, n: u32) -> f64 {
        self.model.mimo_range(n)
    }

    /// Closed-form outage probability at `distance` meters for `n_tx`
    /// transmitters (1 or 2) and `n_receivers` selection-combining branches.
    fn outage_probability(&self, n_tx: u32, n_receivers: u32, distance: f64) -> PyResult<f64> {
        self.model
            .outage_probability(n_tx, n_receivers, distance)
            .map_err(to_py_err)
    }

    /// Monte-Carlo outage estimate over independent fading draws; returns
    /// `(estimate, std_error)`.
    #[pyo3(signature = (n_tx, n_receivers, distance, draws = 200_000, seed = 1))]
    fn mc_outage(
        &self,
        n_tx: u32,
        n_receivers: u32,
        distance: f64,
        draws: u64,
        seed: u64,
    ) -> PyResult<(f64, f64)> {
        let mut rng = RngStream::new(seed, 0);
        let mc = mc_outage(&self.model.config, n_tx, n_receivers, distance, &mut rng, draws)
            .map_err(to_py_err)?;
        Ok((mc.estimate, mc.std_error))
    }

    /// Smallest helper-cluster size able to bridge `gap` toward a cluster of
    /// `n_receivers`; returns `(n, capped)` where `n == 0` means the gap is
    /// bridgeable without a helper and `capped` flags sizes beyond the cap.
    fn min_bridge_cluster(&self, n_receivers: u32, gap: f64) -> (u32, bool) {
        let need = self.model.min_bridge_cluster(n_receivers, gap);
        (need.n, need.capped)
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel(r={:.3}, k_factor={}, delta={}, p_t={:.4}, bridge_size_cap={}, cooperative={})",
            self.model.r,
            self.model.config.k_factor,
            self.model.config.delta,
            self.model.config.p_t,
            self.model.bridge_size_cap,
            !self.model.non_cooperative,
        )
    }
}

/// P_N(k): probability that a cluster holds exactly k vehicles under Poisson
/// traffic of density `lam` with connection range `r`.
#[pyfunction]
fn cluster_size_pmf(lam: f64, r: f64, k: u64) -> PyResult<f64> {
    analytics::cluster_size_pmf(lam, r, k).map_err(to_py_err)
}

/// Per-attempt success probability averaged over the cluster-size mixture.
#[pyfunction]
fn mixture_survival(ch: &Channel, lam: f64) -> PyResult<f64> {
    analytics::mixture_survival(&ch.model, &traffic(lam, 1.0)).map_err(to_py_err)
}

/// Probability that the gap behind a random cluster is immediately bridgeable.
#[pyfunction]
fn bridge_probability(ch: &Channel, lam: f64) -> PyResult<f64> {
    analytics::bridge_probability(&ch.model, &traffic(lam, 1.0)).map_err(to_py_err)
}

/// Expected forwarding distance per renewal cycle, meters.
#[pyfunction]
fn expected_forward_distance(ch: &Channel, lam: f64) -> PyResult<f64> {
    analytics::expected_forward_distance(&ch.model, &traffic(lam, 1.0)).map_err(to_py_err)
}

/// Expected length of a gap that cannot be bridged immediately, meters.
#[pyfunction]
fn expected_unbridged_gap(ch: &Channel, lam: f64) -> PyResult<f64> {
    analytics::expected_unbridged_gap(&ch.model, &traffic(lam, 1.0)).map_err(to_py_err)
}

/// Expected opposing-lane distance scanned until a cluster able to bridge
/// `gap` appears; returns `(meters, degraded)` where `degraded` flags mass
/// regularized at the helper-size cap.
#[pyfunction]
fn expected_bridge_distance(ch: &Channel, lam: f64, gap: f64) -> PyResult<(f64, bool)> {
    let b = analytics::expected_bridge_distance(&ch.model, &traffic(lam, 1.0), gap)
        .map_err(to_py_err)?;
    Ok((b.meters, b.degraded))
}

/// Expected waiting time per blocked cycle at closing speed 2v, seconds.
#[pyfunction]
fn expected_blocking_time(ch: &Channel, lam: f64, v: f64) -> PyResult<f64> {
    analytics::expected_blocking_time(&ch.model, &traffic(lam, v)).map_err(to_py_err)
}

/// Expected decode time per crossing under retransmissions every `tau`
/// seconds, seconds.
#[pyfunction]
fn expected_transmission_time(ch: &Channel, lam: f64, tau: f64) -> PyResult<f64> {
    analytics::expected_transmission_time(&ch.model, &traffic(lam, 1.0), &ProtocolConfig { tau })
        .map_err(to_py_err)
}

/// Closed-form propagation speed with its component terms as a dict.
#[pyfunction]
fn analytic_ips<'py>(
    py: Python<'py>,
    ch: &Channel,
    lam: f64,
    v: f64,
    tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let b = analytics::analytic_ips(&ch.model, &traffic(lam, v), &ProtocolConfig { tau })
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("expected_distance", b.e_d)?;
    d.set_item("expected_wait", b.e_tw)?;
    d.set_item("expected_crossing", b.e_tt)?;
    d.set_item("bridge_probability", b.p_b)?;
    d.set_item("expected_unbridged_gap", b.e_ge)?;
    d.set_item("v_p", b.v_p)?;
    d.set_item("v_p_ground", b.v_p_ground)?;
    d.set_item("cap_excess_probability", b.cap_excess_probability)?;
    d.set_item("fully_connected", b.fully_connected)?;
    Ok(d)
}

fn parse_mode(s: &str) -> PyResult<SimMode> {
    match s {
        "deterministic-range" => Ok(SimMode::DeterministicRange),
        "channel-sampled" => Ok(SimMode::ChannelSampled),
        other => Err(PyValueError::new_err(format!(
            "mode: expected deterministic-range or channel-sampled, got `{other}`"
        ))),
    }
}

fn parse_scenario(s: &str) -> PyResult<BlockScenario> {
    match s {
        "renewal" => Ok(BlockScenario::Renewal),
        "coherent" => Ok(BlockScenario::Coherent),
        other => Err(PyValueError::new_err(format!(
            "block_scenario: expected renewal or coherent, got `{other}`"
        ))),
    }
}

/// Monte-Carlo propagation-speed estimate as a dict. `stop_cycles` and
/// `stop_span` (meters) are mutually exclusive; with neither, each replicate
/// spans twenty expected cycle lengths. Set `include_records=True` for
/// per-replicate detail.
#[pyfunction]
#[pyo3(signature = (
    ch,
    lam,
    v,
    tau = 0.01,
    *,
    seed = 0x5EED,
    replicates = 20,
    mode = "deterministic-range",
    block_scenario = "renewal",
    stop_cycles = None,
    stop_span = None,
    road_length = None,
    max_scan_clusters = 10_000_000,
    time_budget = None,
    include_records = false,
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    ch: &Channel,
    lam: f64,
    v: f64,
    tau: f64,
    seed: u64,
    replicates: u32,
    mode: &str,
    block_scenario: &str,
    stop_cycles: Option<u64>,
    stop_span: Option<f64>,
    road_length: Option<f64>,
    max_scan_clusters: u64,
    time_budget: Option<f64>,
    include_records: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let stop = match (stop_cycles, stop_span) {
        (Some(_), Some(_)) => {
            return Err(PyValueError::new_err(
                "set only one of stop_cycles and stop_span",
            ))
        }
        (Some(n), None) => Some(StopRule::Cycles(n)),
        (None, Some(s)) => Some(StopRule::Span(s)),
        (None, None) => None,
    };
    let sim = SimConfig {
        mode: parse_mode(mode)?,
        scenario: parse_scenario(block_scenario)?,
        seed,
        replicates,
        stop,
        road_length,
        max_scan_clusters,
        time_budget,
    };
    let est = simulator::measure_ips(
        &ch.model,
        &traffic(lam, v),
        &ProtocolConfig { tau },
        &sim,
    )
    .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("v_p", est.v_p)?;
    d.set_item("v_p_wall", est.v_p_wall)?;
    d.set_item("std_error", est.std_error)?;
    d.set_item("mean_wait", est.mean_wait)?;
    d.set_item("mean_cycle_distance", est.mean_cycle_distance)?;
    d.set_item("mean_crossing_radio", est.mean_crossing_radio)?;
    d.set_item("bridged_fraction", est.bridged_fraction)?;
    d.set_item("hops_per_crossing", est.hops_per_crossing)?;
    d.set_item("replicates", est.replicates)?;
    d.set_item("censored", est.censored)?;
    d.set_item("cycles", est.cycles)?;
    if include_records {
        let rows = PyList::empty(py);
        for rec in &est.records {
            let row = PyDict::new(py);
            row.set_item("replicate", rec.replicate)?;
            row.set_item("cycles", rec.cycles)?;
            row.set_item("distance", rec.distance)?;
            row.set_item("renewal_time", rec.renewal_time)?;
            row.set_item("wall_distance", rec.wall_distance)?;
            row.set_item("wall_time", rec.wall_time)?;
            row.set_item("wait", rec.wait)?;
            row.set_item("radio", rec.radio)?;
            row.set_item("crossings", rec.crossings)?;
            row.set_item("hops", rec.hops)?;
            row.set_item("bridged", rec.bridged)?;
            row.set_item("blocked", rec.blocked)?;
            row.set_item("censored", rec.censored)?;
            row.set_item("road_exhausted", rec.road_exhausted)?;
            rows.append(row)?;
        }
        d.set_item("records", rows)?;
    }
    Ok(d)
}

#[pymodule]
fn highway_ips(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Channel>()?;
    m.add_function(wrap_pyfunction!(cluster_size_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_survival, m)?)?;
    m.add_function(wrap_pyfunction!(bridge_probability, m)?)?;
    m.add_function(wrap_pyfunction!(expected_forward_distance, m)?)?;
    m.add_function(wrap_pyfunction!(expected_unbridged_gap, m)?)?;
    m.add_function(wrap_pyfunction!(expected_bridge_distance, m)?)?;
    m.add_function(wrap_pyfunction!(expected_blocking_time, m)?)?;
    m.add_function(wrap_pyfunction!(expected_transmission_time, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_ips, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}

//! Closed-form IPS pipeline: cluster-size law, bridge-distance transform,
//! unbridged-gap law, blocking time, forward distance, transmission time, and
//! the assembled propagation speed.
//!
//! Geometry convention: cluster positions are reduced to points and a "gap"
//! is the excess spacing beyond the clustering radius r, which by
//! memorylessness of the Poisson process is exactly Exp(lambda) and
//! independent of cluster sizes. All thresholds, distances and the propagation
//! speed live in this excess metric; the reported v_p is relative to the
//! eastbound co-moving frame, with a ground-frame variant (+v) alongside.

use crate::channel::{RangeModel, GAIN_TABLE_CAP};
use crate::numerics::quadrature::{integrate, Quadrature};
use crate::numerics::series::truncate_geometric_series;
use crate::{Error, Result};

/// Poisson traffic parameters, symmetric in both directions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TrafficConfig {
    /// Vehicles per meter per direction.
    pub lambda: f64,
    /// Speed, meters per second (eastbound +v, westbound -v).
    pub v: f64,
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::Config(format!("v must be > 0, got {}", self.v)));
        }
        Ok(())
    }
}

/// Retransmission protocol: one attempt every tau seconds until decoded.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProtocolConfig {
    pub tau: f64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Analytic IPS with its component terms.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct IpsBreakdown {
    /// Expected forwarding distance per renewal cycle (m).
    pub e_d: f64,
    /// Expected blocking (waiting) time per cycle (s).
    pub e_tw: f64,
    /// Expected transmission time per cycle (s).
    pub e_tt: f64,
    /// Probability that a gap is immediately bridgeable.
    pub p_b: f64,
    /// Expected unbridged-gap length (m).
    pub e_ge: f64,
    /// Propagation speed in the eastbound co-moving frame (m/s).
    pub v_p: f64,
    /// Ground-frame speed: v_p + v.
    pub v_p_ground: f64,
    /// Probability that a blocked gap requires an opposing cluster larger
    /// than the helper-size cap (mass handled under the cap regularization).
    pub cap_excess_probability: f64,
    /// Set when the bridge probability is numerically 1: waiting vanishes and
    /// the speed is transmission-limited.
    pub fully_connected: bool,
}

/// Probability that a cluster holds exactly k vehicles:
/// P_N(k) = e^(-lambda r) (1 - e^(-lambda r))^(k-1), k >= 1.
pub fn cluster_size_pmf(lambda: f64, r: f64, k: u64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("cluster size must be >= 1".into()));
    }
    if !(lambda > 0.0 && r > 0.0) {
        return Err(Error::Domain("lambda and r must be positive".into()));
    }
    let q = 1.0 - (-lambda * r).exp();
    Ok((1.0 - q) * q.powf((k - 1) as f64))
}

/// P(N <= n) = 1 - (1 - e^(-lambda r))^n, with the empty case F_N(0) = 0.
pub fn cluster_size_cdf(lambda: f64, r: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let q = 1.0 - (-lambda * r).exp();
    1.0 - q.powf(n as f64)
}

/// Per-model shorthand used throughout: q = P(N >= 2) = 1 - e^(-lambda r).
fn cluster_growth(model: &RangeModel, traffic: &TrafficConfig) -> f64 {
    1.0 - (-traffic.lambda * model.r).exp()
}

/// Last cluster size worth enumerating: geometric mass beyond it is < 1e-16.
fn series_limit(q: f64) -> u32 {
    if q <= 0.0 {
        return 1;
    }
    let k = (1e-16f64.ln() / q.ln()).ceil();
    (k as u32 + 1).clamp(8, GAIN_TABLE_CAP)
}

/// S = sum_k P_N(k) e^(-lambda r F(k)): the chance that one draw of
/// (receiving cluster, fresh gap) is NOT one-hop bridgeable. The bridging
/// probability and several tilt diagnostics are functions of S alone.
pub fn mixture_survival(model: &RangeModel, traffic: &TrafficConfig) -> Result<f64> {
    traffic.validate()?;
    let q = cluster_growth(model, traffic);
    let lam = traffic.lambda;
    let r = model.r;
    if q >= 1.0 {
        // Traffic so dense that every cluster saturates the gain table.
        return Ok((-lam * r * model.gain(GAIN_TABLE_CAP)).exp());
    }
    let (s, _) = truncate_geometric_series(
        |k| {
            let pmf = (1.0 - q) * q.powi(k as i32 - 1);
            pmf * (-lam * r * model.gain(k as u32)).exp()
        },
        // Geometric mass of sizes beyond k, damped by the weakest remaining
        // survival factor (the exponent keeps this effective at dense traffic).
        |k| {
            let next = (k as u32).saturating_add(1).min(GAIN_TABLE_CAP);
            q.powi(k as i32) * (-lam * r * model.gain(next)).exp()
        },
        1e-14,
    )?;
    Ok(s)
}

/// Laplace transform at `theta` of the extra opposing-lane distance B until a
/// cluster able to bridge `gap` into a receiver of `n_rx` vehicles:
/// with p = P(cluster qualifies) and Exp(lambda) spacings,
/// beta = p / (1 - (1-p) lambda/(lambda+theta)).
pub fn bridge_laplace(
    model: &RangeModel,
    traffic: &TrafficConfig,
    theta: f64,
    gap: f64,
    n_rx: u32,
) -> Result<f64> {
    traffic.validate()?;
    if !(theta >= 0.0) {
        return Err(Error::Domain(format!("theta must be >= 0, got {theta}")));
    }
    if !(gap >= 0.0) {
        return Err(Error::Domain(format!("gap must be >= 0, got {gap}")));
    }
    let need = model.min_bridge_cluster(n_rx, gap);
    if need.capped {
        return Err(Error::Domain(
            "gap unbridgeable: required opposing cluster exceeds the gain table".into(),
        ));
    }
    if need.n <= 1 || theta == 0.0 {
        // No opposing help needed / first cluster qualifies (B = 0), or the
        // transform is evaluated at 0 where it is 1 for any a.s.-finite B.
        return Ok(1.0);
    }
    let q = cluster_growth(model, traffic);
    let p = q.powi(need.n as i32 - 1); // P(N >= need)
    let lam = traffic.lambda;
    Ok(p / (1.0 - (1.0 - p) * lam / (lam + theta)))
}

/// Expected bridge distance with a degraded-accuracy marker set when any
/// contribution was clamped at the helper-size cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeDistance {
    pub meters: f64,
    pub degraded: bool,
}

/// E(B(gap)): the expected extra opposing-lane distance scanned until a
/// cluster able to bridge `gap` appears, averaged over the receiving-cluster
/// size. A cluster of k receivers needs an opposing cluster of
/// G(k) = min { n : r F(n) + r F(k) >= gap } vehicles (clamped at the cap),
/// qualifying with probability q^(G-1) per cluster, whence the per-size term
/// (q^-(G-1) - 1)/lambda.
pub fn expected_bridge_distance(
    model: &RangeModel,
    traffic: &TrafficConfig,
    gap: f64,
) -> Result<BridgeDistance> {
    traffic.validate()?;
    if !(gap >= 0.0) {
        return Err(Error::Domain(format!("gap must be >= 0, got {gap}")));
    }
    let q = cluster_growth(model, traffic);
    let lam = traffic.lambda;
    let cap = model.bridge_size_cap;
    let k_lim = series_limit(q);
    let mut total = 0.0;
    let mut degraded = false;
    for k in 1..=k_lim {
        let need = model.min_bridge_cluster(k, gap);
        if need.n == 0 {
            // Larger receivers need even less help: everything beyond is zero.
            break;
        }
        let g = if need.capped || need.n > cap {
            degraded = true;
            cap
        } else {
            need.n
        };
        if g <= 1 {
            continue;
        }
        let pmf = (1.0 - q) * q.powi(k as i32 - 1);
        total += pmf * (q.powi(-(g as i32 - 1)) - 1.0) / lam;
    }
    Ok(BridgeDistance {
        meters: total,
        degraded,
    })
}

/// Density of the unbridged-gap length: the mixture over receiving-cluster
/// sizes of Exp(lambda) conditioned beyond the one-hop range r F(k).
/// Sizes past the gain-table cap reuse the capped threshold (geometrically
/// negligible mass).
pub fn unbridged_gap_pdf(model: &RangeModel, traffic: &TrafficConfig, x: f64) -> Result<f64> {
    traffic.validate()?;
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("gap length must be >= 0, got {x}")));
    }
    let q = cluster_growth(model, traffic);
    let lam = traffic.lambda;
    let r = model.r;
    let k_lim = series_limit(q);
    let mut dens = 0.0;
    for k in 1..=k_lim {
        let threshold = r * model.gain(k);
        if threshold > x {
            break; // thresholds grow with k
        }
        let pmf = (1.0 - q) * q.powi(k as i32 - 1);
        dens += pmf * lam * (-lam * (x - threshold)).exp();
    }
    // Tail lump: sizes beyond the enumeration share the clamped threshold.
    let t_cap = r * model.gain(GAIN_TABLE_CAP);
    if x >= t_cap {
        dens += q.powi(k_lim as i32) * lam * (-lam * (x - t_cap)).exp();
    }
    Ok(dens)
}

/// CDF companion of [`unbridged_gap_pdf`] (closed form per mixture component).
pub fn unbridged_gap_cdf(model: &RangeModel, traffic: &TrafficConfig, x: f64) -> Result<f64> {
    traffic.validate()?;
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("gap length must be >= 0, got {x}")));
    }
    let q = cluster_growth(model, traffic);
    let lam = traffic.lambda;
    let r = model.r;
    let k_lim = series_limit(q);
    let mut cdf = 0.0;
    for k in 1..=k_lim {
        let threshold = r * model.gain(k);
        if threshold > x {
            break; // thresholds grow with k
        }
        let pmf = (1.0 - q) * q.powi(k as i32 - 1);
        cdf += pmf * (1.0 - (-lam * (x - threshold)).exp());
    }
    let t_cap = r * model.gain(GAIN_TABLE_CAP);
    if x >= t_cap {
        cdf += q.powi(k_lim as i32) * (1.0 - (-lam * (x - t_cap)).exp());
    }
    Ok(cdf)
}

/// E(G_e), the expected unbridged-gap length. Computed two ways - the printed
/// conditional-mean mixture with its truncated-exponential integrals evaluated
/// numerically, and the simplified closed form sum_k P_N(k) (r F(k) + 1/lambda)
/// (which follows from int_a^inf x lam e^(-lam x) dx = e^(-lam a)(a + 1/lam)) -
/// and cross-asserted to 1e-9 relative before the closed form is returned.
pub fn expected_unbridged_gap(model: &RangeModel, traffic: &TrafficConfig) -> Result<f64> {
    traffic.validate()?;
    let q = cluster_growth(model, traffic);
    let lam = traffic.lambda;
    let r = model.r;
    let f_max = model.gain(GAIN_TABLE_CAP);
    if q >= 1.0 {
        // Every cluster saturates the gain table: single-atom mixture.
        return Ok(r * f_max + 1.0 / lam);
    }
    let (closed, _) = truncate_geometric_series(
        |k| {
            let pmf = (1.0 - q) * q.powi(k as i32 - 1);
            pmf * (r * model.gain(k as u32) + 1.0 / lam)
        },
        |k| q.powi(k as i32) * (r * f_max + 1.0 / lam),
        1e-12,
    )?;

    // Independent evaluation of the printed form over the dominant sizes.
    let quad = Quadrature::default();
    let k_lim = series_limit(q);
    let mut printed = 0.0;
    for k in 1..=k_lim {
        let pmf = (1.0 - q) * q.powi(k as i32 - 1);
        let a = r * model.gain(k);
        let integral = integrate(|x| x * lam * (-lam * x).exp(), a, f64::INFINITY, &quad)?;
        printed += pmf * integral / (-lam * a).exp();
    }
    // The enumerated sizes miss geometric tail mass; compare like for like by
    // adding the closed-form remainder.
    let tail = closed
        - {
            let mut s = 0.0;
            for k in 1..=k_lim {
                let pmf = (1.0 - q) * q.powi(k as i32 - 1);
                s += pmf * (r * model.gain(k) + 1.0 / lam);
            }
            s
        };
    let printed_total = printed + tail;
    if ((printed_total - closed) / closed).abs() > 1e-9 {
        return Err(Error::Estimation(format!(
            "unbridged-gap forms disagree: printed {printed_total}, closed {closed}"
        )));
    }
    Ok(closed)
}

/// The blocking-time integral I = int E(B(x)) p_e(x) dx, evaluated exactly:
/// E(B(x)) is piecewise constant between the one-hop thresholds r F(k) and
/// the two-hop thresholds r (F(k) + F(n)), and the p_e mass of each piece has
/// closed form, so I is a finite sum plus a closed tail beyond the last
/// breakpoint. Returns the integral and a cap-clamp marker.
fn blocking_integral(model: &RangeModel, traffic: &TrafficConfig) -> Result<(f64, bool)> {
    let q = cluster_growth(model, traffic);
    let lam = traffic.lambda;
    let r = model.r;
    let cap = model.bridge_size_cap;
    // By memorylessness, the mass of gaps deep enough to clamp at the helper
    // cap is e^(-lam r F(cap)) for every receiver size alike.
    let degraded = (-lam * r * model.gain(cap)).exp() > 1e-9;
    if q >= 1.0 {
        // Helpers of any size arrive back to back: no scan distance accrues.
        return Ok((0.0, degraded));
    }
    let k_lim = series_limit(q);

    // Per-size helper cost jumps from c(n) to c(n+1) as x crosses
    // r (F(k) + F(n)); collect every jump as a weighted event, alongside the
    // density-mass events where mixture components switch on at r F(k).
    let c = |n: u32| q.powi(-(n as i32 - 1)) - 1.0;
    // (x, component weight arriving, E(B) delta)
    let mut events: Vec<(f64, f64, f64)> =
        Vec::with_capacity((k_lim as usize + 1) * (cap as usize + 1));
    let push_component = |pmf: f64, t: f64, events: &mut Vec<(f64, f64, f64)>| {
        events.push((t, pmf, 0.0));
        for n in 1..cap {
            events.push((t + r * model.gain(n), 0.0, pmf * (c(n + 1) - c(n)) / lam));
        }
    };
    for k in 1..=k_lim {
        let pmf = (1.0 - q) * q.powi(k as i32 - 1);
        push_component(pmf, r * model.gain(k), &mut events);
    }
    // Geometric remainder beyond the enumerated sizes, at the clamped threshold.
    let t_cap = r * model.gain(GAIN_TABLE_CAP);
    push_component(q.powi(k_lim as i32), t_cap, &mut events);
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Sweep with the decayed weight w(x) = sum pmf_k e^(-lam (x - t_k)) over
    // started components; the piece mass on [a, b] is w(a) (1 - e^(-lam (b-a))).
    let mut integral = 0.0;
    let mut w = 0.0;
    let mut eb = 0.0;
    let mut prev_x = 0.0;
    for &(x, arriving, deb) in &events {
        if x > prev_x {
            let decay = (-lam * (x - prev_x)).exp();
            integral += eb * w * (1.0 - decay);
            w *= decay;
            prev_x = x;
        }
        w += arriving;
        eb += deb;
    }
    // Beyond the last event every component has started and E(B) is constant.
    integral += eb * w;
    Ok((integral, degraded))
}

/// E(T_w): expected waiting time at a block. The opposing traffic must close
/// the unbridged gap itself, the lead-in to its first cluster (mean 1/lambda),
/// and the scan distance E(B), at closing speed 2v:
/// E(T_w) = [E(G_e) + 1/lambda + int E(B(x)) p_e(x) dx] / (2 v).
pub fn expected_blocking_time(model: &RangeModel, traffic: &TrafficConfig) -> Result<f64> {
    traffic.validate()?;
    let e_ge = expected_unbridged_gap(model, traffic)?;
    let (integral, _) = blocking_integral(model, traffic)?;
    Ok((e_ge + 1.0 / traffic.lambda + integral) / (2.0 * traffic.v))
}

/// P_b: probability that a fresh gap is immediately crossable - the
/// equal-weight mixture of the one-hop event (gap within the receiver's MIMO
/// range) and the two-hop event (gap within the combined range via an
/// opposing relay cluster). Both printed series reduce to S:
/// P_b = (1/2)(1 - S) + (1/2)(1 - S^2).
pub fn bridge_probability(model: &RangeModel, traffic: &TrafficConfig) -> Result<f64> {
    let s = mixture_survival(model, traffic)?;
    Ok(1.0 - 0.5 * (s + s * s))
}

/// E(D) = 1/(lambda (1 - P_b)): expected forwarding distance per cycle.
pub fn expected_forward_distance(model: &RangeModel, traffic: &TrafficConfig) -> Result<f64> {
    let p_b = bridge_probability(model, traffic)?;
    let blocked = 1.0 - p_b;
    if blocked <= 1e-15 {
        return Err(Error::Degenerate(format!(
            "network effectively fully connected (P_b = {p_b}); forward distance unbounded"
        )));
    }
    Ok(1.0 / (traffic.lambda * blocked))
}

/// Mean per-attempt outage, averaged over the receiving-cluster size and the
/// attempted link distance I ~ Exp(lambda) truncated to the decodable range
/// [0, r F(k)] (transmissions are only attempted within range).
pub fn mean_attempt_outage(model: &RangeModel, traffic: &TrafficConfig) -> Result<f64> {
    traffic.validate()?;
    let q = cluster_growth(model, traffic);
    let lam = traffic.lambda;
    let r = model.r;
    let quad = Quadrature {
        rel_tol: 1e-9,
        abs_tol: 1e-13,
        max_subdivisions: 40,
    };
    let k_lim = series_limit(q);
    let mut mean = 0.0;
    for k in 1..=k_lim {
        let pmf = (1.0 - q) * q.powi(k as i32 - 1);
        if pmf < 1e-15 {
            break;
        }
        let reach = r * model.gain(k);
        // The exponential weight is spent long before 45/lambda; beyond that
        // the remainder is bounded by the design outage times e^(-45).
        let hi = reach.min(45.0 / lam);
        let raw = integrate(
            |i| {
                if i <= 0.0 {
                    0.0
                } else {
                    model.outage_probability(2, k, i).unwrap_or(1.0) * lam * (-lam * i).exp()
                }
            },
            0.0,
            hi,
            &quad,
        )?;
        mean += pmf * raw / (1.0 - (-lam * reach).exp());
    }
    Ok(mean)
}

/// E(T_t) = (3 tau / 2) / (1 - mean outage): one-and-a-half decode attempts
/// per cycle on average (one-hop and relayed crossings equally likely), each
/// attempt repeating every tau until decoded.
pub fn expected_transmission_time(
    model: &RangeModel,
    traffic: &TrafficConfig,
    protocol: &ProtocolConfig,
) -> Result<f64> {
    protocol.validate()?;
    let m = mean_attempt_outage(model, traffic)?;
    if m >= 1.0 - 1e-12 {
        return Err(Error::Degenerate(
            "mean outage saturated; transmissions never complete".into(),
        ));
    }
    Ok(1.5 * protocol.tau / (1.0 - m))
}

/// Assemble the full analytic breakdown: v_p = E(D) / (E(T_w) + E(T_t)) in
/// the eastbound co-moving frame. In the fully-connected regime the wait
/// vanishes and the speed is transmission-limited over mean gaps of 1/lambda.
pub fn analytic_ips(
    model: &RangeModel,
    traffic: &TrafficConfig,
    protocol: &ProtocolConfig,
) -> Result<IpsBreakdown> {
    traffic.validate()?;
    protocol.validate()?;
    let e_ge = expected_unbridged_gap(model, traffic)?;
    let p_b = bridge_probability(model, traffic)?;
    let e_tt = expected_transmission_time(model, traffic, protocol)?;
    let cap_excess =
        (-traffic.lambda * model.r * model.gain(model.bridge_size_cap)).exp();
    match expected_forward_distance(model, traffic) {
        Ok(e_d) => {
            let e_tw = expected_blocking_time(model, traffic)?;
            let v_p = e_d / (e_tw + e_tt);
            Ok(IpsBreakdown {
                e_d,
                e_tw,
                e_tt,
                p_b,
                e_ge,
                v_p,
                v_p_ground: v_p + traffic.v,
                cap_excess_probability: cap_excess,
                fully_connected: false,
            })
        }
        Err(Error::Degenerate(_)) => {
            let e_d = 1.0 / traffic.lambda;
            let v_p = e_d / e_tt;
            Ok(IpsBreakdown {
                e_d,
                e_tw: 0.0,
                e_tt,
                p_b,
                e_ge,
                v_p,
                v_p_ground: v_p + traffic.v,
                cap_excess_probability: cap_excess,
                fully_connected: true,
            })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelConfig, DEFAULT_BRIDGE_SIZE_CAP};
    use approx::assert_abs_diff_eq;

    fn model() -> RangeModel {
        RangeModel::build(ChannelConfig::default(), DEFAULT_BRIDGE_SIZE_CAP).unwrap()
    }

    fn noncoop() -> RangeModel {
        RangeModel::non_cooperative(ChannelConfig::default(), DEFAULT_BRIDGE_SIZE_CAP).unwrap()
    }

    fn anchor() -> TrafficConfig {
        TrafficConfig { lambda: 0.05, v: 30.0 }
    }

    fn protocol() -> ProtocolConfig {
        ProtocolConfig { tau: 0.01 }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn pmf_halving_case() {
        // lambda r = ln 2 makes the size law exactly 2^-k.
        let lambda = 0.05;
        let r = 2f64.ln() / lambda;
        for k in 1..=10u64 {
            assert_abs_diff_eq!(
                cluster_size_pmf(lambda, r, k).unwrap(),
                0.5f64.powi(k as i32),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        let (lambda, r) = (0.02, 50.0); // lambda r = 1
        let (sum, _) = truncate_geometric_series(
            |k| cluster_size_pmf(lambda, r, k).unwrap(),
            |k| (1.0 - (-1.0f64).exp()).powi(k as i32),
            1e-10,
        )
        .unwrap();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn cdf_pmf_consistency() {
        let (lambda, r) = (0.05, 25.0);
        assert_eq!(cluster_size_cdf(lambda, r, 0), 0.0);
        // lambda r = ln 2: F_N(3) = 7/8.
        let rh = 2f64.ln() / lambda;
        assert_abs_diff_eq!(cluster_size_cdf(lambda, rh, 3), 7.0 / 8.0, epsilon = 1e-14);
        let mut acc = 0.0;
        for n in 1..=100u64 {
            acc += cluster_size_pmf(lambda, r, n).unwrap();
            assert_abs_diff_eq!(cluster_size_cdf(lambda, r, n), acc, epsilon = 1e-12);
        }
    }

    #[test]
    fn pmf_rejects_bad_args() {
        assert!(cluster_size_pmf(0.05, 25.0, 0).is_err());
        assert!(cluster_size_pmf(-0.05, 25.0, 1).is_err());
    }

    #[test]
    fn laplace_transform_at_zero_is_one() {
        let m = model();
        let t = anchor();
        for gap in [10.0, 75.0, 150.0, 190.0] {
            for n_rx in [1u32, 2, 5] {
                assert_abs_diff_eq!(
                    bridge_laplace(&m, &t, 0.0, gap, n_rx).unwrap(),
                    1.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn laplace_degenerate_and_capped_cases() {
        let m = model();
        let t = anchor();
        // Directly bridgeable: no opposing cluster needed, beta = 1 always.
        for theta in [0.0, 0.01, 0.05, 0.2] {
            assert_eq!(bridge_laplace(&m, &t, theta, 3.0 * m.r, 2).unwrap(), 1.0);
        }
        // Far past the gain table: typed error.
        let huge = m.r * (m.gain(2) + m.gain(4096)) + 10.0;
        assert!(bridge_laplace(&m, &t, 0.1, huge, 2).is_err());
    }

    #[test]
    fn laplace_matches_direct_formula_when_help_needed() {
        let m = model();
        let t = anchor();
        // gap = 6r into a 3-cluster: required opposing size is 4.
        let gap = 6.0 * m.r;
        assert_eq!(m.min_bridge_cluster(3, gap).n, 4);
        let q: f64 = 1.0 - (-t.lambda * m.r).exp();
        let p = q.powi(3);
        for theta in [0.01, 0.05, 0.3] {
            let want = p / (1.0 - (1.0 - p) * t.lambda / (t.lambda + theta));
            assert_abs_diff_eq!(
                bridge_laplace(&m, &t, theta, gap, 3).unwrap(),
                want,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn laplace_derivative_matches_bridge_distance_for_fixed_need() {
        // -d beta / d theta at 0 equals E(B) for a fixed (gap, receiver) pair.
        let m = model();
        let t = anchor();
        let gap = 6.0 * m.r;
        let q: f64 = 1.0 - (-t.lambda * m.r).exp();
        let need = m.min_bridge_cluster(3, gap).n; // 4
        let want = (q.powi(-(need as i32 - 1)) - 1.0) / t.lambda;
        let h = 1e-7;
        let d = (bridge_laplace(&m, &t, h, gap, 3).unwrap() - 1.0) / h;
        assert!(rel(-d, want) < 1e-4, "derivative {d}, want {want}");
    }

    #[test]
    fn bridge_distance_zero_until_two_hop_threshold() {
        let m = model();
        let t = anchor();
        // Below r (F(1) + F(1)) even a lone opposing vehicle bridges: E(B) = 0.
        for gap in [0.0, 2.0 * m.r, 3.0 * m.r, 4.0 * m.r] {
            let b = expected_bridge_distance(&m, &t, gap).unwrap();
            assert_eq!(b.meters, 0.0, "gap {gap}");
            assert!(!b.degraded);
        }
    }

    #[test]
    fn bridge_distance_matches_frozen_reference() {
        let m = model();
        let t = anchor();
        let b = expected_bridge_distance(&m, &t, 6.0 * m.r).unwrap();
        assert!(rel(b.meters, 83.166_821_825_419_39) < 1e-9, "E(B)(6r) = {}", b.meters);
        // The smallest receivers need a cluster beyond the cap there.
        assert!(b.degraded);
    }

    #[test]
    fn unbridged_gap_density_support_and_mass() {
        let m = model();
        let t = anchor();
        let lo = m.r * m.gain(1);
        assert_eq!(unbridged_gap_pdf(&m, &t, lo - 1.0).unwrap(), 0.0);
        assert_eq!(unbridged_gap_cdf(&m, &t, lo - 1e-9).unwrap(), 0.0);
        // Total mass via the closed-form CDF far into the exponential tail.
        let deep = m.r * m.gain(4096) + 60.0 / t.lambda;
        assert_abs_diff_eq!(unbridged_gap_cdf(&m, &t, deep).unwrap(), 1.0, epsilon = 1e-9);
        // Density integrates to the CDF difference on threshold-free segments
        // (the density jumps exactly at the one-hop thresholds r F(k)).
        let quad = Quadrature::default();
        for k in [1u32, 2, 5, 20] {
            let (a, b) = (m.r * m.gain(k), m.r * m.gain(k + 1));
            let part = integrate(|x| unbridged_gap_pdf(&m, &t, x).unwrap(), a, b, &quad).unwrap();
            let want =
                unbridged_gap_cdf(&m, &t, b).unwrap() - unbridged_gap_cdf(&m, &t, a).unwrap();
            assert_abs_diff_eq!(part, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn unbridged_gap_mean_matches_frozen_reference() {
        let m = model();
        let t = anchor();
        let e = expected_unbridged_gap(&m, &t).unwrap();
        assert!(rel(e, 89.853_231_163_397) < 1e-9, "E(G_e) = {e}");
    }

    #[test]
    fn unbridged_gap_mean_flat_table_closed_form() {
        // F == 1 collapses the mixture: E(G_e) = r + 1/lambda.
        let m = noncoop();
        let t = anchor();
        let e = expected_unbridged_gap(&m, &t).unwrap();
        assert_abs_diff_eq!(e, 45.0, epsilon = 1e-9);
    }

    #[test]
    fn blocking_time_halves_when_speed_doubles() {
        let m = model();
        let slow = TrafficConfig { lambda: 0.05, v: 15.0 };
        let fast = TrafficConfig { lambda: 0.05, v: 30.0 };
        let tw_slow = expected_blocking_time(&m, &slow).unwrap();
        let tw_fast = expected_blocking_time(&m, &fast).unwrap();
        assert_abs_diff_eq!(tw_slow / tw_fast, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn blocking_time_without_scan_term() {
        // Helper cap of 1 forces E(B) == 0, leaving (E(G_e) + 1/lambda)/(2v).
        let m = RangeModel::build(ChannelConfig::default(), 1).unwrap();
        let t = anchor();
        let want = (expected_unbridged_gap(&m, &t).unwrap() + 20.0) / 60.0;
        assert_abs_diff_eq!(expected_blocking_time(&m, &t).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn blocking_time_matches_frozen_reference() {
        let m = model();
        let t = anchor();
        let tw = expected_blocking_time(&m, &t).unwrap();
        assert!(rel(tw, 1.933_797_854_984_539) < 1e-4, "E(T_w) = {tw}");
    }

    #[test]
    fn blocking_integral_agrees_with_sampling() {
        // The exact event-sweep evaluation must match both the independent
        // reference value (6.1746 +- 3e-3) and a direct Monte-Carlo average of
        // E(B(X)) with X drawn from the unbridged-gap law.
        let m = model();
        let t = anchor();
        let (exact, degraded) = blocking_integral(&m, &t).unwrap();
        assert!(degraded); // deep gaps clamp at the helper cap
        assert!(rel(exact, 6.174_640_135_675_331) < 1e-3, "integral {exact}");

        let mut rng = crate::numerics::RngStream::new(42, 0);
        let q: f64 = 1.0 - (-t.lambda * m.r).exp();
        let n = 500_000usize;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let k = 1 + ((1.0 - rng.next_f64()).ln() / q.ln()).floor() as u32;
            let x = m.r * m.gain(k)
                + crate::numerics::sample_exponential(&mut rng, t.lambda).unwrap();
            let b = expected_bridge_distance(&m, &t, x).unwrap().meters;
            sum += b;
            sum_sq += b * b;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - exact).abs() < 4.0 * se,
            "sweep {exact} vs sampled {mean} +- {se}"
        );
    }

    #[test]
    fn survival_and_bridge_probability_match_frozen_reference() {
        let m = model();
        let t = anchor();
        let s = mixture_survival(&m, &t).unwrap();
        assert!(rel(s, 0.039_427_237_259_435_66) < 1e-10, "S = {s}");
        let pb = bridge_probability(&m, &t).unwrap();
        assert!(rel(pb, 0.979_509_127_851_326_3) < 1e-10, "P_b = {pb}");
        // Non-cooperative: S collapses to e^(-lambda r).
        let s_nc = mixture_survival(&noncoop(), &t).unwrap();
        assert!(rel(s_nc, 0.286_504_796_860_189_8) < 1e-10);
    }

    #[test]
    fn bridge_probability_equals_printed_double_sum() {
        // Direct evaluation of the one-hop sum and the two-hop double sum.
        let m = model();
        let t = anchor();
        let q: f64 = 1.0 - (-t.lambda * m.r).exp();
        let kmax = 200usize;
        let pmf = |k: usize| (1.0 - q) * q.powi(k as i32 - 1);
        let mut one = 0.0;
        for k in 1..=kmax {
            one += pmf(k) * (1.0 - (-t.lambda * m.r * m.gain(k as u32)).exp());
        }
        let mut two = 0.0;
        for nw in 1..=kmax {
            for ne in 1..=kmax {
                let reach = m.r * (m.gain(nw as u32) + m.gain(ne as u32));
                two += pmf(nw) * pmf(ne) * (1.0 - (-t.lambda * reach).exp());
            }
        }
        let printed = 0.5 * one + 0.5 * two;
        let factored = bridge_probability(&m, &t).unwrap();
        assert_abs_diff_eq!(printed, factored, epsilon = 1e-9);
    }

    #[test]
    fn bridge_probability_limits() {
        let m = model();
        let dense = TrafficConfig { lambda: 2.0, v: 30.0 };
        assert!(bridge_probability(&m, &dense).unwrap() > 0.999_999);
        let sparse = TrafficConfig { lambda: 1e-5, v: 30.0 };
        assert!(bridge_probability(&m, &sparse).unwrap() < 0.01);
    }

    #[test]
    fn forward_distance_matches_frozen_reference() {
        let t = anchor();
        let d = expected_forward_distance(&model(), &t).unwrap();
        assert!(rel(d, 976.044_350_620_502_8) < 1e-10, "E(D) = {d}");
        let d_nc = expected_forward_distance(&noncoop(), &t).unwrap();
        assert!(rel(d_nc, 108.521_723_851_486_14) < 1e-10, "E(D) noncoop = {d_nc}");
    }

    #[test]
    fn forward_distance_self_consistency() {
        // E(D) lambda (1 - P_b) = 1 to 1e-12, and the bridged/unbridged gap
        // decomposition E(G_e) + E(C_e) reproduces it.
        for lambda in [0.025, 0.05, 0.1] {
            let t = TrafficConfig { lambda, v: 30.0 };
            let m = model();
            let pb = bridge_probability(&m, &t).unwrap();
            let d = expected_forward_distance(&m, &t).unwrap();
            assert_abs_diff_eq!(d * lambda * (1.0 - pb), 1.0, epsilon = 1e-12);
            let ge = expected_unbridged_gap(&m, &t).unwrap();
            let bridged_mean = (1.0 / lambda - (1.0 - pb) * ge) / pb;
            let c_e = pb * bridged_mean / (1.0 - pb);
            assert!(rel(ge + c_e, d) < 1e-9);
        }
    }

    #[test]
    fn transmission_time_matches_frozen_reference() {
        let m = model();
        let t = anchor();
        let mean = mean_attempt_outage(&m, &t).unwrap();
        assert!(rel(mean, 1.114_638_557_036_300_4e-4) < 1e-5, "mean outage {mean}");
        let tt = expected_transmission_time(&m, &t, &protocol()).unwrap();
        assert!(rel(tt, 0.015_001_672_144_219_196) < 1e-6, "E(T_t) = {tt}");
        let tt_nc = expected_transmission_time(&noncoop(), &t, &protocol()).unwrap();
        assert!(rel(tt_nc, 0.015_000_002_230_346_4) < 1e-6);
    }

    #[test]
    fn transmission_time_zero_outage_limit() {
        // Cranking transmit power drives outage to zero: E(T_t) -> 3 tau / 2.
        let cfg = ChannelConfig::default();
        let strong = ChannelConfig { p_t: cfg.p_t * 1e9, ..cfg };
        // Keep the clustering radius matched so thresholds stay comparable:
        // build directly on the boosted power (r grows, outage shrinks).
        let m = RangeModel::build(strong, DEFAULT_BRIDGE_SIZE_CAP).unwrap();
        let tt = expected_transmission_time(&m, &anchor(), &protocol()).unwrap();
        assert_abs_diff_eq!(tt, 0.015, epsilon = 1e-8);
    }

    #[test]
    fn analytic_ips_matches_frozen_reference() {
        let t = anchor();
        let p = protocol();
        let coop = analytic_ips(&model(), &t, &p).unwrap();
        assert!(rel(coop.v_p, 500.843_897_503_683_6) < 2e-4, "v_p = {}", coop.v_p);
        assert_abs_diff_eq!(coop.v_p_ground, coop.v_p + 30.0, epsilon = 1e-12);
        assert!(rel(coop.cap_excess_probability, 0.010_992_417_611_527_328) < 1e-10);
        assert!(!coop.fully_connected);
        let nc = analytic_ips(&noncoop(), &t, &p).unwrap();
        assert!(rel(nc.v_p, 53.793_364_452_551_77) < 2e-4, "noncoop v_p = {}", nc.v_p);
        let ratio = coop.v_p / nc.v_p;
        assert!(rel(ratio, 9.310_514_458_441_265) < 5e-4, "ratio {ratio}");
    }

    #[test]
    fn analytic_ips_spot_checks_across_grid() {
        // Independent reference values at two sweep corners (4-5 significant
        // digits carried by the reference).
        let p = protocol();
        let t = TrafficConfig { lambda: 0.04, v: 30.0 };
        let m = model();
        let b = analytic_ips(&m, &t, &p).unwrap();
        assert!(rel(b.e_d, 562.6) < 1e-3, "E(D) {}", b.e_d);
        assert!(rel(b.e_ge, 91.03) < 1e-3, "E(G_e) {}", b.e_ge);
        assert!(rel(b.e_tw, 2.436) < 1e-3, "E(T_w) {}", b.e_tw);

        let cfg20 = ChannelConfig::default().with_range_target(20.0).unwrap();
        let m20 = RangeModel::build(cfg20, DEFAULT_BRIDGE_SIZE_CAP).unwrap();
        let t2 = TrafficConfig { lambda: 0.1, v: 30.0 };
        let b2 = analytic_ips(&m20, &t2, &p).unwrap();
        assert!(rel(b2.e_d, 5226.5) < 1e-3, "E(D) {}", b2.e_d);
        assert!(rel(b2.e_ge, 74.68) < 1e-3, "E(G_e) {}", b2.e_ge);
        assert!(rel(b2.e_tw, 1.416) < 1.5e-3, "E(T_w) {}", b2.e_tw);
    }

    #[test]
    fn ips_monotone_in_speed_and_radius() {
        let p = protocol();
        let m = model();
        let mut prev = 0.0;
        for v in [10.0, 20.0, 30.0] {
            let b = analytic_ips(&m, &TrafficConfig { lambda: 0.04, v }, &p).unwrap();
            assert!(b.v_p > prev);
            prev = b.v_p;
        }
        let t = anchor();
        let mut prev_r = 0.0;
        for r in [20.0, 25.0, 30.0] {
            let cfg = ChannelConfig::default().with_range_target(r).unwrap();
            let m = RangeModel::build(cfg, DEFAULT_BRIDGE_SIZE_CAP).unwrap();
            let b = analytic_ips(&m, &t, &p).unwrap();
            assert!(b.v_p > prev_r, "r = {r}");
            prev_r = b.v_p;
        }
    }

    #[test]
    fn cooperative_dominates_noncooperative() {
        let p = protocol();
        for lambda in [0.025, 0.05, 0.1] {
            let t = TrafficConfig { lambda, v: 30.0 };
            let coop = analytic_ips(&model(), &t, &p).unwrap();
            let nc = analytic_ips(&noncoop(), &t, &p).unwrap();
            assert!(coop.v_p >= nc.v_p);
        }
    }

    #[test]
    fn transmission_limited_regime_vanishes_wait() {
        // tau -> 0 pushes v_p toward E(D)/E(T_w).
        let m = model();
        let t = anchor();
        let b = analytic_ips(&m, &t, &ProtocolConfig { tau: 1e-12 }).unwrap();
        let want = b.e_d / b.e_tw;
        assert!(rel(b.v_p, want) < 1e-9);
    }

    #[test]
    fn fully_connected_regime_is_flagged() {
        let m = model();
        let t = TrafficConfig { lambda: 3.0, v: 30.0 };
        let b = analytic_ips(&m, &t, &protocol()).unwrap();
        assert!(b.fully_connected);
        assert_eq!(b.e_tw, 0.0);
        assert_abs_diff_eq!(b.e_d, 1.0 / 3.0, epsilon = 1e-12);
        assert!(rel(b.v_p, b.e_d / b.e_tt) < 1e-12);
    }
}

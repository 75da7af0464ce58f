//! Physical-layer model: Rician fading outage, single-vehicle range, virtual
//! MIMO range with selection diversity, the range-gain function F(N_r) with
//! its generalized inverses, and a Monte-Carlo outage oracle.
//!
//! Fading convention: each link magnitude is psi = 1 + sigma * z with z a
//! complex unit normal, so |psi|^2 / sigma^2 is noncentral chi-square with
//! 2 degrees of freedom and noncentrality 1/sigma^2 = K, and the two-transmitter
//! sum has 4 degrees of freedom and noncentrality 2K. Outage probabilities come
//! from the cube-root normal approximation to the noncentral chi-square CDF.

use crate::numerics::rng::RngStream;
use crate::numerics::special::{inverse_normal_cdf, normal_cdf};
use crate::{Error, Result};

/// Size of the memoized gain table; cluster-size mass beyond this is
/// geometrically negligible for every traffic intensity of interest.
pub const GAIN_TABLE_CAP: u32 = 4096;

/// Default helper-cluster size cap shared by analytics and simulator: a gap
/// needing a larger opposing cluster is treated as needing exactly this size.
/// Without the cap the blocking-time integral diverges (the required-size
/// weights grow faster than the gap density decays).
pub const DEFAULT_BRIDGE_SIZE_CAP: u32 = 8;

/// Radio and fading parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ChannelConfig {
    /// Rician K factor (> 0); sigma^2 = 1/K.
    pub k_factor: f64,
    /// Path-loss exponent, in [2, 4].
    pub delta: f64,
    /// Transmit power (watts).
    pub p_t: f64,
    /// Minimum acceptable received power (watts).
    pub p_min: f64,
    /// Target outage probability in (0, 1).
    pub p_out_target: f64,
    /// Noise power spectral density; used only for SNR bookkeeping in the
    /// Monte-Carlo oracle.
    pub noise_psd: f64,
}

impl ChannelConfig {
    /// Scatter power sigma^2 = 1/K.
    pub fn sigma_sq(&self) -> f64 {
        1.0 / self.k_factor
    }

    /// Normalized transmit power P_0 = K P_t / (K + 1).
    pub fn p0(&self) -> f64 {
        self.k_factor * self.p_t / (self.k_factor + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor > 0.0 && self.k_factor.is_finite()) {
            return Err(Error::Config(format!("K must be > 0, got {}", self.k_factor)));
        }
        if !(2.0..=4.0).contains(&self.delta) {
            return Err(Error::Config(format!(
                "path-loss exponent must be in [2, 4], got {}",
                self.delta
            )));
        }
        if !(self.p_t > 0.0 && self.p_min > 0.0) {
            return Err(Error::Config("powers must be positive".into()));
        }
        if !(self.p_out_target > 0.0 && self.p_out_target < 1.0) {
            return Err(Error::Config(format!(
                "target outage must be in (0,1), got {}",
                self.p_out_target
            )));
        }
        if !(self.noise_psd > 0.0) {
            return Err(Error::Config("noise PSD must be positive".into()));
        }
        Ok(())
    }

    /// Transmit power giving `single_range == r_target`, all else fixed.
    pub fn with_range_target(mut self, r_target: f64) -> Result<Self> {
        if !(r_target > 0.0) {
            return Err(Error::Config(format!("range target must be > 0, got {r_target}")));
        }
        let pp = patnaik_params(2, self.k_factor)?;
        let z = inverse_normal_cdf(self.p_out_target)?;
        let bracket = pp.variance.sqrt() * z + pp.mean;
        if bracket <= 0.0 {
            return Err(Error::Config(
                "target outage unreachable under normal approximation".into(),
            ));
        }
        let s2 = self.sigma_sq();
        let p0 = r_target.powf(self.delta) * self.p_min / (s2 * (2.0 + 1.0 / s2) * bracket.powi(3));
        self.p_t = p0 * (self.k_factor + 1.0) / self.k_factor;
        Ok(self)
    }
}

impl Default for ChannelConfig {
    /// K = 10, delta = 2, 1% target outage, powers normalized so the
    /// single-vehicle range is 25 m.
    fn default() -> Self {
        ChannelConfig {
            k_factor: 10.0,
            delta: 2.0,
            p_t: 1.0,
            p_min: 1.0,
            p_out_target: 0.01,
            noise_psd: 1e-12,
        }
        .with_range_target(25.0)
        .expect("default channel config is valid")
    }
}

/// Mean and variance of the cube-root normal approximation: for X noncentral
/// chi-square (f, nc), (X / (f + nc))^(1/3) is approximately N(M, V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatnaikParams {
    pub mean: f64,
    pub variance: f64,
}

pub fn patnaik_params(dof: u32, noncentrality: f64) -> Result<PatnaikParams> {
    if dof < 1 {
        return Err(Error::Domain("dof must be >= 1".into()));
    }
    if !(noncentrality >= 0.0 && noncentrality.is_finite()) {
        return Err(Error::Domain(format!(
            "noncentrality must be nonnegative, got {noncentrality}"
        )));
    }
    let rho = dof as f64 + noncentrality;
    let b = noncentrality / rho;
    let v = 2.0 / 9.0 * (1.0 + b) / rho;
    Ok(PatnaikParams {
        mean: 1.0 - v,
        variance: v,
    })
}

/// Shared core of the range formulas:
/// range = [c * P_0 * (2 sigma^2 + 1) * (sqrt(V) Phi^-1(p_link) + M)^3 / P_min]^(1/delta)
/// where c = 2 for the two-transmitter sum, 1 for a single transmitter, and
/// p_link is the per-link outage target.
fn range_formula(cfg: &ChannelConfig, pp: PatnaikParams, c: f64, p_link: f64) -> Result<f64> {
    let z = inverse_normal_cdf(p_link)?;
    let bracket = pp.variance.sqrt() * z + pp.mean;
    if bracket <= 0.0 {
        return Err(Error::Domain(
            "target outage unreachable under normal approximation".into(),
        ));
    }
    let s2 = cfg.sigma_sq();
    let base = c * cfg.p0() * s2 * (2.0 + 1.0 / s2) * bracket.powi(3) / cfg.p_min;
    Ok(base.powf(1.0 / cfg.delta))
}

/// Single-vehicle transmission range: one transmitter, one receiver, at the
/// target outage.
pub fn single_range(cfg: &ChannelConfig) -> Result<f64> {
    cfg.validate()?;
    let pp = patnaik_params(2, cfg.k_factor)?;
    range_formula(cfg, pp, 1.0, cfg.p_out_target)
}

/// Virtual-MIMO range: two transmitters, selection over `n_receivers`
/// receivers; the per-link target is p_out^(1/N_r).
pub fn mimo_range(cfg: &ChannelConfig, n_receivers: u32) -> Result<f64> {
    cfg.validate()?;
    if n_receivers < 1 {
        return Err(Error::Domain("n_receivers must be >= 1".into()));
    }
    let pp = patnaik_params(4, 2.0 * cfg.k_factor)?;
    range_formula(cfg, pp, 2.0, cfg.p_out_target.powf(1.0 / n_receivers as f64))
}

/// Range of a single-transmitter cluster (the special case of a lone vehicle
/// transmitting): the two-transmitter power factor is dropped and the 2-dof
/// fading law applies, but selection diversity over the receivers remains.
pub fn single_tx_range(cfg: &ChannelConfig, n_receivers: u32) -> Result<f64> {
    cfg.validate()?;
    if n_receivers < 1 {
        return Err(Error::Domain("n_receivers must be >= 1".into()));
    }
    let pp = patnaik_params(2, cfg.k_factor)?;
    range_formula(cfg, pp, 1.0, cfg.p_out_target.powf(1.0 / n_receivers as f64))
}

/// Range gain g = F(N_r) = mimo_range / single_range.
pub fn range_gain(cfg: &ChannelConfig, n_receivers: u32) -> Result<f64> {
    Ok(mimo_range(cfg, n_receivers)? / single_range(cfg)?)
}

/// Result of a generalized-inverse lookup on the gain table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvGain {
    pub n: u32,
    /// True when the query exceeded the table cap; the returned size is the
    /// cap and downstream sums carry degraded accuracy.
    pub capped: bool,
}

/// Computed single-vehicle range plus the memoized gain table and the
/// helper-size cap shared by analytics and simulator. Immutable after
/// construction; queries are read-only and safely shareable across threads.
#[derive(Debug, Clone)]
pub struct RangeModel {
    pub r: f64,
    gains: Vec<f64>,
    pub config: ChannelConfig,
    pub bridge_size_cap: u32,
    pub non_cooperative: bool,
}

impl RangeModel {
    /// Build the cooperative model: eager gain table up to [`GAIN_TABLE_CAP`],
    /// checked strictly increasing and > 1.
    pub fn build(config: ChannelConfig, bridge_size_cap: u32) -> Result<Self> {
        config.validate()?;
        if bridge_size_cap < 1 {
            return Err(Error::Config("bridge size cap must be >= 1".into()));
        }
        let r = single_range(&config)?;
        // F(n) = mimo/single: the shared power prefactor cancels, so compute
        // the bracket ratio directly.
        let pp1 = patnaik_params(2, config.k_factor)?;
        let z1 = inverse_normal_cdf(config.p_out_target)?;
        let b1 = pp1.variance.sqrt() * z1 + pp1.mean;
        let pp2 = patnaik_params(4, 2.0 * config.k_factor)?;
        let mut gains = Vec::with_capacity(GAIN_TABLE_CAP as usize);
        for n in 1..=GAIN_TABLE_CAP {
            let p_link = config.p_out_target.powf(1.0 / n as f64);
            let z2 = inverse_normal_cdf(p_link)?;
            let b2 = pp2.variance.sqrt() * z2 + pp2.mean;
            if b2 <= 0.0 {
                return Err(Error::Domain(
                    "target outage unreachable under normal approximation".into(),
                ));
            }
            let g = (2.0 * b2.powi(3) / b1.powi(3)).powf(1.0 / config.delta);
            gains.push(g);
        }
        for n in 1..gains.len() {
            if gains[n] <= gains[n - 1] {
                return Err(Error::Domain(format!(
                    "gain table not strictly increasing at N_r = {}",
                    n + 1
                )));
            }
        }
        if gains[0] <= 1.0 {
            return Err(Error::Domain("range gain must exceed 1".into()));
        }
        Ok(RangeModel {
            r,
            gains,
            config,
            bridge_size_cap,
            non_cooperative: false,
        })
    }

    /// The non-cooperative baseline: F == 1 for every cluster size (plain
    /// single-vehicle range), same cap semantics, monotonicity vacuous.
    pub fn non_cooperative(config: ChannelConfig, bridge_size_cap: u32) -> Result<Self> {
        config.validate()?;
        if bridge_size_cap < 1 {
            return Err(Error::Config("bridge size cap must be >= 1".into()));
        }
        let r = single_range(&config)?;
        Ok(RangeModel {
            r,
            gains: vec![1.0; GAIN_TABLE_CAP as usize],
            config,
            bridge_size_cap,
            non_cooperative: true,
        })
    }

    /// F(n) for n >= 1, clamped to the table cap.
    pub fn gain(&self, n: u32) -> f64 {
        debug_assert!(n >= 1);
        self.gains[(n.clamp(1, GAIN_TABLE_CAP) - 1) as usize]
    }

    /// MIMO range R(n) = r * F(n).
    pub fn mimo_range(&self, n: u32) -> f64 {
        self.r * self.gain(n)
    }

    /// Smallest n >= 1 with F(n) >= y; capped sentinel if y exceeds the table.
    pub fn inv_gain_min(&self, y: f64) -> InvGain {
        if y <= self.gains[0] {
            return InvGain { n: 1, capped: false };
        }
        if y > *self.gains.last().unwrap() {
            return InvGain {
                n: GAIN_TABLE_CAP,
                capped: true,
            };
        }
        // First index with gain >= y.
        let idx = self.gains.partition_point(|&g| g < y);
        InvGain {
            n: idx as u32 + 1,
            capped: false,
        }
    }

    /// Largest k >= 0 with F(k) < y, taking F(0) := 0: the largest receiver
    /// cluster for which a gap of y * r is not directly bridgeable.
    pub fn inv_gain_max(&self, y: f64) -> InvGain {
        if y <= 0.0 || self.gains[0] >= y {
            return InvGain { n: 0, capped: false };
        }
        if *self.gains.last().unwrap() < y {
            return InvGain {
                n: GAIN_TABLE_CAP,
                capped: true,
            };
        }
        let idx = self.gains.partition_point(|&g| g < y);
        InvGain {
            n: idx as u32,
            capped: false,
        }
    }

    /// Smallest opposing-cluster size able to bridge `gap` into a receiving
    /// cluster of `n_rx` vehicles: 0 if the gap is directly bridgeable,
    /// otherwise min { n : r F(n) + r F(n_rx) >= gap }.
    pub fn min_bridge_cluster(&self, n_rx: u32, gap: f64) -> InvGain {
        debug_assert!(gap >= 0.0);
        let reach = self.gain(n_rx);
        if gap <= self.r * reach {
            return InvGain { n: 0, capped: false };
        }
        self.inv_gain_min(gap / self.r - reach)
    }

    /// Analytic (cube-root normal) outage for a transmission over `distance`
    /// with `n_tx` in {1, 2} transmitters and selection over `n_receivers`.
    pub fn outage_probability(&self, n_tx: u32, n_receivers: u32, distance: f64) -> Result<f64> {
        outage_probability(&self.config, n_tx, n_receivers, distance)
    }

    /// One fading draw of a link: `true` when every selection branch falls
    /// below the decode threshold. Single-draw counterpart of [`mc_outage`]
    /// (the config was validated at model construction).
    pub fn sample_outage(
        &self,
        n_tx: u32,
        n_receivers: u32,
        distance: f64,
        rng: &mut RngStream,
    ) -> Result<bool> {
        if !(n_tx == 1 || n_tx == 2) {
            return Err(Error::Domain(format!("n_tx must be 1 or 2, got {n_tx}")));
        }
        if n_receivers < 1 {
            return Err(Error::Domain("n_receivers must be >= 1".into()));
        }
        if !(distance >= 0.0) {
            return Err(Error::Domain("distance must be nonnegative".into()));
        }
        let threshold = if distance == 0.0 {
            0.0
        } else {
            self.config.p_min * distance.powf(self.config.delta) / self.config.p0()
        };
        let sigma = self.config.sigma_sq().sqrt();
        Ok(draw_selection_outage(sigma, threshold, n_tx, n_receivers, rng))
    }
}

/// One draw of the selection-combining outcome: each branch sums `n_tx`
/// squared Rician magnitudes; outage when all branches fall below `threshold`
/// (in units of P_0 d^-delta). Branch draws stop at the first decodable one,
/// which cannot change the outcome.
fn draw_selection_outage(
    sigma: f64,
    threshold: f64,
    n_tx: u32,
    n_receivers: u32,
    rng: &mut RngStream,
) -> bool {
    for _ in 0..n_receivers {
        let mut w = 0.0;
        for _ in 0..n_tx {
            let re = 1.0 + sigma * rng.standard_normal();
            let im = sigma * rng.standard_normal();
            w += re * re + im * im;
        }
        if w >= threshold {
            return false;
        }
    }
    true
}

/// Analytic outage: per-link P(received < P_min) by the cube-root normal
/// approximation, raised to the number of selection branches.
pub fn outage_probability(
    cfg: &ChannelConfig,
    n_tx: u32,
    n_receivers: u32,
    distance: f64,
) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be > 0, got {distance}")));
    }
    if n_receivers < 1 {
        return Err(Error::Domain("n_receivers must be >= 1".into()));
    }
    let (dof, nc) = match n_tx {
        1 => (2u32, cfg.k_factor),
        2 => (4u32, 2.0 * cfg.k_factor),
        _ => return Err(Error::Domain(format!("n_tx must be 1 or 2, got {n_tx}"))),
    };
    let pp = patnaik_params(dof, nc)?;
    let rho = dof as f64 + nc;
    // Per-link: P(chi'2 < P_min d^delta / (P_0 sigma^2)).
    let u = cfg.p_min * distance.powf(cfg.delta) / (cfg.p0() * cfg.sigma_sq());
    let t = (u / rho).cbrt();
    let p_link = normal_cdf((t - pp.mean) / pp.variance.sqrt());
    Ok(p_link.powi(n_receivers as i32))
}

/// Monte-Carlo outage estimate.
#[derive(Debug, Clone, Copy)]
pub struct McOutage {
    pub estimate: f64,
    /// Binomial standard error sqrt(p(1-p)/n).
    pub std_error: f64,
    pub samples: u64,
    /// Mean edge SNR in dB (expected best-branch received power over the
    /// noise PSD), recorded for bookkeeping.
    pub mean_edge_snr_db: f64,
}

/// Empirical outage fraction over `samples` independent fading draws: each of
/// `n_receivers` branches receives the sum of `n_tx` squared Rician magnitudes
/// scaled by P_0 d^-delta; outage when every branch falls below P_min
/// (selection combining). All receivers sit at the edge distance, the
/// worst case under the identical-large-scale-fading approximation.
pub fn mc_outage(
    cfg: &ChannelConfig,
    n_tx: u32,
    n_receivers: u32,
    distance: f64,
    rng: &mut RngStream,
    samples: u64,
) -> Result<McOutage> {
    cfg.validate()?;
    if !(n_tx == 1 || n_tx == 2) {
        return Err(Error::Domain(format!("n_tx must be 1 or 2, got {n_tx}")));
    }
    if n_receivers < 1 {
        return Err(Error::Domain("n_receivers must be >= 1".into()));
    }
    if samples < 10_000 {
        return Err(Error::Domain("mc_outage needs at least 10^4 samples".into()));
    }
    if !(distance >= 0.0) {
        return Err(Error::Domain("distance must be nonnegative".into()));
    }
    let sigma = cfg.sigma_sq().sqrt();
    // Outage per branch: P_0 d^-delta * w < P_min, i.e. w < threshold.
    let threshold = if distance == 0.0 {
        0.0
    } else {
        cfg.p_min * distance.powf(cfg.delta) / cfg.p0()
    };
    let mut failures = 0u64;
    for _ in 0..samples {
        if draw_selection_outage(sigma, threshold, n_tx, n_receivers, rng) {
            failures += 1;
        }
    }
    let estimate = failures as f64 / samples as f64;
    let std_error = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    // E|psi|^2 = 1 + 2 sigma^2 per transmitter.
    let mean_power = cfg.p0() * distance.powf(-cfg.delta) * n_tx as f64 * (1.0 + 2.0 / cfg.k_factor);
    let mean_edge_snr_db = 10.0 * (mean_power / cfg.noise_psd).log10();
    Ok(McOutage {
        estimate,
        std_error,
        samples,
        mean_edge_snr_db,
    })
}

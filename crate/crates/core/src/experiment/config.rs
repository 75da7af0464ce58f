//! Flat `key = value` experiment configuration: parsing, defaults, validation,
//! and the canonical resolved form that gets hashed into every output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::channel::{ChannelConfig, DEFAULT_BRIDGE_SIZE_CAP, GAIN_TABLE_CAP};
use crate::simulator::{BlockScenario, SimConfig, SimMode, StopRule};
use crate::{Error, Result};

/// What the run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One traffic point: full closed-form breakdown plus one estimate.
    SinglePoint,
    /// Sweep vehicle density at fixed speed.
    DensitySweep,
    /// Sweep speed at fixed density.
    SpeedSweep,
    /// Array gain and design range versus receiver count, with a log-law fit.
    GainCurve,
    /// Cooperative over non-cooperative wall-clock speed ratio versus density.
    GainRatio,
    /// Fading-draw outage at the design range versus the closed-form target.
    ChannelMc,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::SinglePoint,
        Scenario::DensitySweep,
        Scenario::SpeedSweep,
        Scenario::GainCurve,
        Scenario::GainRatio,
        Scenario::ChannelMc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::SinglePoint => "single-point",
            Scenario::DensitySweep => "density-sweep",
            Scenario::SpeedSweep => "speed-sweep",
            Scenario::GainCurve => "gain-curve",
            Scenario::GainRatio => "gain-ratio",
            Scenario::ChannelMc => "channel-mc",
        }
    }

    fn parse(s: &str) -> Result<Scenario> {
        Scenario::ALL
            .iter()
            .find(|sc| sc.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|sc| sc.as_str()).collect();
                Error::Config(format!(
                    "unknown scenario `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Every key the parser accepts, used for suggestions on typos.
const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "channel.k_factor",
    "channel.delta",
    "channel.p_t",
    "channel.range_target",
    "channel.p_min",
    "channel.p_out_target",
    "channel.noise_psd",
    "model.cooperative",
    "model.bridge_size_cap",
    "traffic.lambda",
    "traffic.v",
    "protocol.tau",
    "sim.enabled",
    "sim.mode",
    "sim.block_scenario",
    "sim.seed",
    "sim.replicates",
    "sim.stop_cycles",
    "sim.stop_span",
    "sim.road_length",
    "sim.max_scan_clusters",
    "sim.time_budget",
    "gain.min_receivers",
    "gain.max_receivers",
    "gain.step",
    "mc.draws",
    "mc.receivers",
];

/// A fully resolved experiment: defaults filled, transmit power solved,
/// every value validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub channel: ChannelConfig,
    /// Range target the transmit power was solved for, when it was.
    pub range_target: Option<f64>,
    pub cooperative: bool,
    pub bridge_size_cap: u32,
    pub lambdas: Vec<f64>,
    pub speeds: Vec<f64>,
    pub tau: f64,
    pub sim_enabled: bool,
    pub sim: SimConfig,
    pub gain_min: u32,
    pub gain_max: u32,
    pub gain_step: u32,
    pub mc_draws: u64,
    pub mc_receivers: Vec<u32>,
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got `{raw}`")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: must be finite, got `{raw}`")));
    }
    Ok(v)
}

fn parse_u64(key: &str, raw: &str) -> Result<u64> {
    raw.parse()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got `{raw}`")))
}

fn parse_u32(key: &str, raw: &str) -> Result<u32> {
    raw.parse()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got `{raw}`")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{raw}`"))),
    }
}

fn parse_f64_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    let vals: Result<Vec<f64>> =
        raw.split(',').map(|part| parse_f64(key, part.trim())).collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(vals)
}

fn parse_u32_list(key: &str, raw: &str) -> Result<Vec<u32>> {
    let vals: Result<Vec<u32>> =
        raw.split(',').map(|part| parse_u32(key, part.trim())).collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    Ok(vals)
}

/// Levenshtein distance, for near-miss key suggestions.
fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev + usize::from(ca != cb);
            prev = row[j + 1];
            row[j + 1] = sub.min(prev + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

fn unknown_key_error(key: &str) -> Error {
    let best = KNOWN_KEYS
        .iter()
        .map(|k| (edit_distance(key, k), *k))
        .min()
        .expect("known key list is non-empty");
    if best.0 <= 2 {
        Error::Config(format!("unknown key `{key}`; did you mean `{}`?", best.1))
    } else {
        Error::Config(format!("unknown key `{key}`"))
    }
}

/// Raw `key = value` lines, `#` comments, blank lines. Duplicate keys are
/// rejected rather than silently last-wins.
fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{}`",
                lineno + 1,
                line
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(unknown_key_error(&key));
        }
        if value.is_empty() {
            return Err(Error::Config(format!("{key}: empty value")));
        }
        if entries.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(entries)
}

struct Taker {
    entries: BTreeMap<String, String>,
}

impl Taker {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// `none` in an optional slot means "explicitly unset" so resolved
    /// configs round-trip through the parser.
    fn take_opt(&mut self, key: &str) -> Option<String> {
        match self.entries.remove(key) {
            Some(v) if v == "none" => None,
            other => other,
        }
    }
}

impl ResolvedConfig {
    pub fn from_text(text: &str) -> Result<ResolvedConfig> {
        let mut t = Taker { entries: parse_entries(text)? };

        let scenario = match t.take("scenario") {
            Some(v) => Scenario::parse(&v)?,
            None => Scenario::SinglePoint,
        };

        let k_factor = match t.take("channel.k_factor") {
            Some(v) => parse_f64("channel.k_factor", &v)?,
            None => 10.0,
        };
        let delta = match t.take("channel.delta") {
            Some(v) => parse_f64("channel.delta", &v)?,
            None => 2.0,
        };
        let p_min = match t.take("channel.p_min") {
            Some(v) => parse_f64("channel.p_min", &v)?,
            None => 1.0,
        };
        let p_out_target = match t.take("channel.p_out_target") {
            Some(v) => parse_f64("channel.p_out_target", &v)?,
            None => 0.01,
        };
        let noise_psd = match t.take("channel.noise_psd") {
            Some(v) => parse_f64("channel.noise_psd", &v)?,
            None => 1e-12,
        };
        let p_t_explicit = match t.take_opt("channel.p_t") {
            Some(v) => Some(parse_f64("channel.p_t", &v)?),
            None => None,
        };
        let range_target_raw = match t.take_opt("channel.range_target") {
            Some(v) => Some(parse_f64("channel.range_target", &v)?),
            None => None,
        };

        let base = ChannelConfig {
            k_factor,
            delta,
            p_t: p_t_explicit.unwrap_or(1.0),
            p_min,
            p_out_target,
            noise_psd,
        };
        let (channel, range_target) = match (p_t_explicit, range_target_raw) {
            (Some(_), None) => {
                base.validate()?;
                (base, None)
            }
            (explicit, target_raw) => {
                let target = target_raw.unwrap_or(25.0);
                let solved = base.with_range_target(target)?;
                // Resolved configs carry both keys; accept them as long as
                // they agree (so resolved output re-parses), reject conflicts.
                if let Some(p_t) = explicit {
                    if (p_t - solved.p_t).abs() > 1e-9 * solved.p_t.abs() {
                        return Err(Error::Config(format!(
                            "channel.p_t = {p_t} conflicts with channel.range_target = {target} \
                             (which needs p_t = {}); set only one",
                            solved.p_t
                        )));
                    }
                }
                (solved, Some(target))
            }
        };

        let cooperative = match t.take("model.cooperative") {
            Some(v) => parse_bool("model.cooperative", &v)?,
            None => true,
        };
        let bridge_size_cap = match t.take("model.bridge_size_cap") {
            Some(v) => parse_u32("model.bridge_size_cap", &v)?,
            None => DEFAULT_BRIDGE_SIZE_CAP,
        };

        let lambdas = match t.take("traffic.lambda") {
            Some(v) => parse_f64_list("traffic.lambda", &v)?,
            None => match scenario {
                Scenario::DensitySweep => vec![0.025, 0.04, 0.05, 0.067, 0.1],
                Scenario::GainRatio => vec![
                    0.01, 0.02, 0.03, 0.04, 0.05, 0.067, 0.08, 0.1, 0.125, 0.15, 0.175, 0.2,
                ],
                Scenario::SpeedSweep => vec![0.04],
                _ => vec![0.05],
            },
        };
        let speeds = match t.take("traffic.v") {
            Some(v) => parse_f64_list("traffic.v", &v)?,
            None => match scenario {
                Scenario::SpeedSweep => vec![10.0, 20.0, 30.0],
                _ => vec![30.0],
            },
        };
        let tau = match t.take("protocol.tau") {
            Some(v) => parse_f64("protocol.tau", &v)?,
            None => 0.01,
        };

        let sim_enabled = match t.take("sim.enabled") {
            Some(v) => parse_bool("sim.enabled", &v)?,
            None => true,
        };
        let mode = match t.take("sim.mode").as_deref() {
            None | Some("deterministic-range") => SimMode::DeterministicRange,
            Some("channel-sampled") => SimMode::ChannelSampled,
            Some(v) => {
                return Err(Error::Config(format!(
                    "sim.mode: expected deterministic-range or channel-sampled, got `{v}`"
                )))
            }
        };
        let block_scenario = match t.take("sim.block_scenario").as_deref() {
            None | Some("renewal") => BlockScenario::Renewal,
            Some("coherent") => BlockScenario::Coherent,
            Some(v) => {
                return Err(Error::Config(format!(
                    "sim.block_scenario: expected renewal or coherent, got `{v}`"
                )))
            }
        };
        let seed = match t.take("sim.seed") {
            Some(v) => parse_u64("sim.seed", &v)?,
            None => 24601,
        };
        let replicates = match t.take("sim.replicates") {
            Some(v) => parse_u32("sim.replicates", &v)?,
            None => 20,
        };
        let stop_cycles = match t.take_opt("sim.stop_cycles") {
            Some(v) => Some(parse_u64("sim.stop_cycles", &v)?),
            None => None,
        };
        let stop_span = match t.take_opt("sim.stop_span") {
            Some(v) => Some(parse_f64("sim.stop_span", &v)?),
            None => None,
        };
        let stop = match (stop_cycles, stop_span) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "sim.stop_cycles and sim.stop_span are mutually exclusive".into(),
                ))
            }
            (Some(n), None) => Some(StopRule::Cycles(n)),
            (None, Some(d)) => Some(StopRule::Span(d)),
            (None, None) => None,
        };
        let road_length = match t.take_opt("sim.road_length") {
            Some(v) => Some(parse_f64("sim.road_length", &v)?),
            None => None,
        };
        let max_scan_clusters = match t.take("sim.max_scan_clusters") {
            Some(v) => parse_u64("sim.max_scan_clusters", &v)?,
            None => 10_000_000,
        };
        let time_budget = match t.take_opt("sim.time_budget") {
            Some(v) => Some(parse_f64("sim.time_budget", &v)?),
            None => None,
        };

        let gain_min = match t.take("gain.min_receivers") {
            Some(v) => parse_u32("gain.min_receivers", &v)?,
            None => 1,
        };
        let gain_max = match t.take("gain.max_receivers") {
            Some(v) => parse_u32("gain.max_receivers", &v)?,
            None => 64,
        };
        let gain_step = match t.take("gain.step") {
            Some(v) => parse_u32("gain.step", &v)?,
            None => 1,
        };
        let mc_draws = match t.take("mc.draws") {
            Some(v) => parse_u64("mc.draws", &v)?,
            None => 100_000,
        };
        let mc_receivers = match t.take("mc.receivers") {
            Some(v) => parse_u32_list("mc.receivers", &v)?,
            None => vec![1, 2, 4, 8, 16, 32],
        };

        debug_assert!(t.entries.is_empty(), "parse_entries admitted an unconsumed key");

        let cfg = ResolvedConfig {
            scenario,
            channel,
            range_target,
            cooperative,
            bridge_size_cap,
            lambdas,
            speeds,
            tau,
            sim_enabled,
            sim: SimConfig {
                mode,
                scenario: block_scenario,
                seed,
                replicates,
                stop,
                road_length,
                max_scan_clusters,
                time_budget,
            },
            gain_min,
            gain_max,
            gain_step,
            mc_draws,
            mc_receivers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.sim.validate()?;
        if self.bridge_size_cap < 1 {
            return Err(Error::Config("model.bridge_size_cap must be >= 1".into()));
        }
        for &l in &self.lambdas {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("traffic.lambda: must be > 0, got {l}")));
            }
        }
        for &v in &self.speeds {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("traffic.v: must be > 0, got {v}")));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("protocol.tau: must be > 0, got {}", self.tau)));
        }
        if self.gain_min < 1 || self.gain_min > self.gain_max {
            return Err(Error::Config(format!(
                "gain receiver range [{}, {}] is empty or starts below 1",
                self.gain_min, self.gain_max
            )));
        }
        if self.gain_max > GAIN_TABLE_CAP {
            return Err(Error::Config(format!(
                "gain.max_receivers exceeds the table cap {GAIN_TABLE_CAP}"
            )));
        }
        if self.gain_step < 1 {
            return Err(Error::Config("gain.step must be >= 1".into()));
        }
        if self.mc_draws < 100 {
            return Err(Error::Config("mc.draws must be >= 100".into()));
        }
        for &n in &self.mc_receivers {
            if n < 1 || n > GAIN_TABLE_CAP {
                return Err(Error::Config(format!(
                    "mc.receivers entries must be in [1, {GAIN_TABLE_CAP}], got {n}"
                )));
            }
        }
        Ok(())
    }

    /// Apply CLI overrides before running or printing.
    pub fn apply_overrides(&mut self, seed: Option<u64>, replicates: Option<u32>) {
        if let Some(s) = seed {
            self.sim.seed = s;
        }
        if let Some(r) = replicates {
            self.sim.replicates = r;
        }
    }

    /// Canonical `key = value` form: sorted keys, resolved values, optionals
    /// spelled `none`. Parsing this text reproduces the config exactly; its
    /// bytes are what [`fnv1a_hex`] hashes into `summary.json`.
    pub fn resolved_text(&self) -> String {
        fn list(vals: &[f64]) -> String {
            vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut lines: Vec<(String, String)> = vec![
            ("scenario".into(), self.scenario.as_str().into()),
            ("channel.k_factor".into(), self.channel.k_factor.to_string()),
            ("channel.delta".into(), self.channel.delta.to_string()),
            ("channel.p_t".into(), self.channel.p_t.to_string()),
            (
                "channel.range_target".into(),
                self.range_target.map_or("none".into(), |v| v.to_string()),
            ),
            ("channel.p_min".into(), self.channel.p_min.to_string()),
            ("channel.p_out_target".into(), self.channel.p_out_target.to_string()),
            ("channel.noise_psd".into(), self.channel.noise_psd.to_string()),
            ("model.cooperative".into(), self.cooperative.to_string()),
            ("model.bridge_size_cap".into(), self.bridge_size_cap.to_string()),
            ("traffic.lambda".into(), list(&self.lambdas)),
            ("traffic.v".into(), list(&self.speeds)),
            ("protocol.tau".into(), self.tau.to_string()),
            ("sim.enabled".into(), self.sim_enabled.to_string()),
            (
                "sim.mode".into(),
                match self.sim.mode {
                    SimMode::DeterministicRange => "deterministic-range".into(),
                    SimMode::ChannelSampled => "channel-sampled".into(),
                },
            ),
            (
                "sim.block_scenario".into(),
                match self.sim.scenario {
                    BlockScenario::Renewal => "renewal".into(),
                    BlockScenario::Coherent => "coherent".into(),
                },
            ),
            ("sim.seed".into(), self.sim.seed.to_string()),
            ("sim.replicates".into(), self.sim.replicates.to_string()),
            (
                "sim.stop_cycles".into(),
                match self.sim.stop {
                    Some(StopRule::Cycles(n)) => n.to_string(),
                    _ => "none".into(),
                },
            ),
            (
                "sim.stop_span".into(),
                match self.sim.stop {
                    Some(StopRule::Span(d)) => d.to_string(),
                    _ => "none".into(),
                },
            ),
            (
                "sim.road_length".into(),
                self.sim.road_length.map_or("none".into(), |v| v.to_string()),
            ),
            ("sim.max_scan_clusters".into(), self.sim.max_scan_clusters.to_string()),
            (
                "sim.time_budget".into(),
                self.sim.time_budget.map_or("none".into(), |v| v.to_string()),
            ),
            ("gain.min_receivers".into(), self.gain_min.to_string()),
            ("gain.max_receivers".into(), self.gain_max.to_string()),
            ("gain.step".into(), self.gain_step.to_string()),
            ("mc.draws".into(), self.mc_draws.to_string()),
            (
                "mc.receivers".into(),
                self.mc_receivers.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            ),
        ];
        lines.sort();
        let mut out = String::new();
        for (k, v) in lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// 64-bit FNV-1a as a fixed-width hex string; stamps resolved configs into
/// summaries so outputs are traceable to their exact inputs.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

//! Executes a resolved experiment: builds the range model, runs the scenario
//! grid, and writes `<scenario>.csv`, `summary.json` and `resolved_config.txt`
//! into the output directory. All file contents are deterministic for a given
//! resolved config; timing chatter goes to stderr only.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::analytics::{self, ProtocolConfig, TrafficConfig};
use crate::channel::{mc_outage, RangeModel};
use crate::experiment::config::{fnv1a_hex, ResolvedConfig, Scenario};
use crate::numerics::RngStream;
use crate::simulator::{measure_ips, IpsEstimate, StopRule};
use crate::{Error, Result};

/// Where a run put its outputs.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub table: PathBuf,
    pub summary: PathBuf,
    pub resolved: PathBuf,
    pub rows: usize,
    pub config_hash: String,
}

/// Ordinary least squares of `y` on `x`: (slope, intercept, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "fit needs at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Spread replicate seed blocks apart per grid row so rows never share RNG
/// streams (golden-ratio stride).
fn row_seed(base: u64, row: u64) -> u64 {
    base.wrapping_add((row + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn io_other<E: std::error::Error + Send + Sync + 'static>(e: E) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(serde::Serialize)]
struct PointRow {
    lambda: f64,
    v: f64,
    survival: f64,
    bridge_probability: f64,
    expected_distance_m: f64,
    expected_unbridged_gap_m: f64,
    expected_wait_s: f64,
    expected_crossing_s: f64,
    v_p_analytic: f64,
    v_p_ground: f64,
    fully_connected: bool,
    v_p_sim: Option<f64>,
    v_p_wall_sim: Option<f64>,
    std_error: Option<f64>,
    sim_over_analytic: Option<f64>,
    cycles: Option<u64>,
    censored_replicates: Option<u32>,
}

#[derive(serde::Serialize)]
struct GainRow {
    n_receivers: u32,
    gain: f64,
    range_m: f64,
}

#[derive(serde::Serialize)]
struct RatioRow {
    lambda: f64,
    v_p_wall_coop: Option<f64>,
    v_p_wall_noncoop: Option<f64>,
    wall_ratio: Option<f64>,
    v_p_analytic_coop: Option<f64>,
    v_p_analytic_noncoop: Option<f64>,
    analytic_ratio: Option<f64>,
}

#[derive(serde::Serialize)]
struct McRow {
    n_receivers: u32,
    distance_m: f64,
    target_outage: f64,
    analytic_outage: f64,
    mc_outage: f64,
    draws: u64,
    mc_over_target: f64,
}

struct ScenarioOutput {
    csv: Vec<u8>,
    rows: usize,
    results: Value,
}

fn write_csv<R: serde::Serialize>(rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(io_other)?;
    }
    w.into_inner().map_err(io_other)
}

fn sim_estimate(
    cfg: &ResolvedConfig,
    model: &RangeModel,
    traffic: &TrafficConfig,
    protocol: &ProtocolConfig,
    row: u64,
    stop_default: Option<StopRule>,
) -> Result<IpsEstimate> {
    let mut sim = cfg.sim;
    sim.seed = row_seed(cfg.sim.seed, row);
    if sim.stop.is_none() {
        sim.stop = stop_default;
    }
    measure_ips(model, traffic, protocol, &sim)
}

/// Grid scenarios (single point, density sweep, speed sweep) share one row
/// shape: closed forms plus an optional estimate per (lambda, v) cell.
fn run_points(cfg: &ResolvedConfig, model: &RangeModel) -> Result<ScenarioOutput> {
    let protocol = ProtocolConfig { tau: cfg.tau };
    let mut rows: Vec<PointRow> = Vec::new();
    let mut errors: Vec<String> = Vec::new();
    let mut row_idx = 0u64;

    for &lambda in &cfg.lambdas {
        for &v in &cfg.speeds {
            let traffic = TrafficConfig { lambda, v };
            let survival = analytics::mixture_survival(model, &traffic)?;
            let row = match analytics::analytic_ips(model, &traffic, &protocol) {
                Err(e) => {
                    errors.push(format!("lambda={lambda} v={v}: {e}"));
                    PointRow {
                        lambda,
                        v,
                        survival,
                        bridge_probability: f64::NAN,
                        expected_distance_m: f64::NAN,
                        expected_unbridged_gap_m: f64::NAN,
                        expected_wait_s: f64::NAN,
                        expected_crossing_s: f64::NAN,
                        v_p_analytic: f64::NAN,
                        v_p_ground: f64::NAN,
                        fully_connected: false,
                        v_p_sim: None,
                        v_p_wall_sim: None,
                        std_error: None,
                        sim_over_analytic: None,
                        cycles: None,
                        censored_replicates: None,
                    }
                }
                Ok(b) => {
                    let est = if cfg.sim_enabled {
                        match sim_estimate(cfg, model, &traffic, &protocol, row_idx, None) {
                            Ok(est) => Some(est),
                            Err(e) => {
                                errors.push(format!("lambda={lambda} v={v} sim: {e}"));
                                None
                            }
                        }
                    } else {
                        None
                    };
                    PointRow {
                        lambda,
                        v,
                        survival,
                        bridge_probability: b.p_b,
                        expected_distance_m: b.e_d,
                        expected_unbridged_gap_m: b.e_ge,
                        expected_wait_s: b.e_tw,
                        expected_crossing_s: b.e_tt,
                        v_p_analytic: b.v_p,
                        v_p_ground: b.v_p_ground,
                        fully_connected: b.fully_connected,
                        v_p_sim: est.as_ref().map(|e| e.v_p),
                        v_p_wall_sim: est.as_ref().map(|e| e.v_p_wall),
                        std_error: est.as_ref().map(|e| e.std_error),
                        sim_over_analytic: est.as_ref().map(|e| e.v_p / b.v_p),
                        cycles: est.as_ref().map(|e| e.cycles),
                        censored_replicates: est.as_ref().map(|e| e.censored),
                    }
                }
            };
            rows.push(row);
            row_idx += 1;
        }
    }

    let ratios: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.sim_over_analytic)
        .filter(|x| x.is_finite())
        .collect();
    let mut results = serde_json::Map::new();
    results.insert("rows".into(), json!(rows.len()));
    if !ratios.is_empty() {
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        results.insert("sim_over_analytic_min".into(), json!(min));
        results.insert("sim_over_analytic_max".into(), json!(max));
    }
    if cfg.scenario == Scenario::SpeedSweep {
        let speeds: Vec<f64> = rows.iter().map(|r| r.v_p_sim.unwrap_or(r.v_p_analytic)).collect();
        let monotone = speeds.windows(2).all(|w| w[1] > w[0]);
        results.insert("v_p_increases_with_speed".into(), json!(monotone));
    }
    if !errors.is_empty() {
        results.insert("errors".into(), json!(errors));
    }
    Ok(ScenarioOutput { csv: write_csv(&rows)?, rows: rows.len(), results: Value::Object(results) })
}

fn run_gain_curve(cfg: &ResolvedConfig, model: &RangeModel) -> Result<ScenarioOutput> {
    let mut rows = Vec::new();
    let mut n = cfg.gain_min;
    while n <= cfg.gain_max {
        rows.push(GainRow { n_receivers: n, gain: model.gain(n), range_m: model.mimo_range(n) });
        n = n.saturating_add(cfg.gain_step);
    }
    let mut results = serde_json::Map::new();
    results.insert("rows".into(), json!(rows.len()));
    if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n_receivers as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.gain).collect();
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        results.insert(
            "log_fit".into(),
            json!({ "slope": slope, "intercept": intercept, "r_squared": r2 }),
        );
    }
    Ok(ScenarioOutput { csv: write_csv(&rows)?, rows: rows.len(), results: Value::Object(results) })
}

fn run_gain_ratio(cfg: &ResolvedConfig, model: &RangeModel) -> Result<ScenarioOutput> {
    let protocol = ProtocolConfig { tau: cfg.tau };
    let noncoop = RangeModel::non_cooperative(model.config, model.bridge_size_cap)?;
    let v = cfg.speeds[0];
    let mut rows: Vec<RatioRow> = Vec::new();
    let mut errors: Vec<String> = Vec::new();

    // In dense traffic the cooperative scheme practically never blocks, so an
    // analytic-length span would take forever; a short wall-clock exposure is
    // enough for the ratio.
    let stop_default = Some(StopRule::Span(3_000.0));

    for (i, &lambda) in cfg.lambdas.iter().enumerate() {
        let traffic = TrafficConfig { lambda, v };
        let analytic =
            |m: &RangeModel| analytics::analytic_ips(m, &traffic, &protocol).map(|b| b.v_p).ok();
        let (a_coop, a_non) = (analytic(model), analytic(&noncoop));

        let mut wall = |m: &RangeModel, tag: &str, row: u64| -> Option<f64> {
            if !cfg.sim_enabled {
                return None;
            }
            match sim_estimate(cfg, m, &traffic, &protocol, row, stop_default) {
                Ok(est) => Some(est.v_p_wall),
                Err(e) => {
                    errors.push(format!("lambda={lambda} {tag}: {e}"));
                    None
                }
            }
        };
        let s_coop = wall(model, "cooperative", 2 * i as u64);
        let s_non = wall(&noncoop, "non-cooperative", 2 * i as u64 + 1);

        rows.push(RatioRow {
            lambda,
            v_p_wall_coop: s_coop,
            v_p_wall_noncoop: s_non,
            wall_ratio: s_coop.zip(s_non).map(|(c, n)| c / n),
            v_p_analytic_coop: a_coop,
            v_p_analytic_noncoop: a_non,
            analytic_ratio: a_coop.zip(a_non).map(|(c, n)| c / n),
        });
    }

    let mut results = serde_json::Map::new();
    results.insert("rows".into(), json!(rows.len()));
    let ratios: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.wall_ratio.map(|x| (r.lambda, x))).collect();
    if let Some(&(peak_lambda, peak)) =
        ratios.iter().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
    {
        results.insert("peak_lambda".into(), json!(peak_lambda));
        results.insert("peak_wall_ratio".into(), json!(peak));
        let idx = ratios.iter().position(|&(l, _)| l == peak_lambda).unwrap();
        results.insert("peak_is_interior".into(), json!(idx > 0 && idx + 1 < ratios.len()));
    }
    if !errors.is_empty() {
        results.insert("errors".into(), json!(errors));
    }
    Ok(ScenarioOutput { csv: write_csv(&rows)?, rows: rows.len(), results: Value::Object(results) })
}

fn run_channel_mc(cfg: &ResolvedConfig, model: &RangeModel) -> Result<ScenarioOutput> {
    let target = cfg.channel.p_out_target;
    let mut rows = Vec::new();
    for (i, &n) in cfg.mc_receivers.iter().enumerate() {
        let d = model.mimo_range(n);
        let analytic = model.outage_probability(2, n, d)?;
        let mut rng = RngStream::new(row_seed(cfg.sim.seed, i as u64), 0);
        let mc = mc_outage(&model.config, 2, n, d, &mut rng, cfg.mc_draws)?;
        rows.push(McRow {
            n_receivers: n,
            distance_m: d,
            target_outage: target,
            analytic_outage: analytic,
            mc_outage: mc.estimate,
            draws: mc.samples,
            mc_over_target: mc.estimate / target,
        });
    }
    let worst = rows
        .iter()
        .map(|r| r.mc_over_target)
        .max_by(|a, b| {
            let (da, db) = ((a.ln()).abs(), (b.ln()).abs());
            da.partial_cmp(&db).unwrap()
        })
        .unwrap_or(f64::NAN);
    let results = json!({
        "rows": rows.len(),
        "worst_mc_over_target": worst,
        "all_within_half_to_double": rows.iter().all(|r| (0.5..=2.0).contains(&r.mc_over_target)),
    });
    Ok(ScenarioOutput { csv: write_csv(&rows)?, rows: rows.len(), results })
}

fn run_inner(cfg: &ResolvedConfig, out_dir: &Path) -> Result<RunReport> {
    let model = if cfg.cooperative {
        RangeModel::build(cfg.channel, cfg.bridge_size_cap)?
    } else {
        RangeModel::non_cooperative(cfg.channel, cfg.bridge_size_cap)?
    };

    let started = std::time::Instant::now();
    let output = match cfg.scenario {
        Scenario::SinglePoint | Scenario::DensitySweep | Scenario::SpeedSweep => {
            run_points(cfg, &model)?
        }
        Scenario::GainCurve => run_gain_curve(cfg, &model)?,
        Scenario::GainRatio => run_gain_ratio(cfg, &model)?,
        Scenario::ChannelMc => run_channel_mc(cfg, &model)?,
    };
    eprintln!(
        "[ips] {} produced {} rows in {:.2}s",
        cfg.scenario.as_str(),
        output.rows,
        started.elapsed().as_secs_f64()
    );

    fs::create_dir_all(out_dir)?;
    let resolved_text = cfg.resolved_text();
    let config_hash = fnv1a_hex(resolved_text.as_bytes());

    let resolved_path = out_dir.join("resolved_config.txt");
    fs::write(&resolved_path, &resolved_text)?;

    let table_name = format!("{}.csv", cfg.scenario.as_str());
    let table_path = out_dir.join(&table_name);
    fs::write(&table_path, &output.csv)?;

    let summary = json!({
        "config_hash": config_hash,
        "scenario": cfg.scenario.as_str(),
        "rows": output.rows,
        "outputs": {
            "table": table_name,
            "resolved_config": "resolved_config.txt",
        },
        "results": output.results,
        "tool": { "name": "ips", "version": env!("CARGO_PKG_VERSION") },
    });
    let summary_path = out_dir.join("summary.json");
    let mut file = fs::File::create(&summary_path)?;
    let text = serde_json::to_string_pretty(&summary).map_err(io_other)?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;

    Ok(RunReport {
        scenario: cfg.scenario.as_str().to_string(),
        table: table_path,
        summary: summary_path,
        resolved: resolved_path,
        rows: output.rows,
        config_hash,
    })
}

/// Run an experiment end to end. `jobs` bounds the rayon thread count for
/// this run; `None` uses the global default.
pub fn run(cfg: &ResolvedConfig, out_dir: &Path, jobs: Option<usize>) -> Result<RunReport> {
    cfg.validate()?;
    match jobs {
        None => run_inner(cfg, out_dir),
        Some(n) => {
            if n == 0 {
                return Err(Error::Config("jobs must be >= 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(io_other)?;
            pool.install(|| run_inner(cfg, out_dir))
        }
    }
}

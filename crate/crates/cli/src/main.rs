//! `ips` — closed-form and Monte-Carlo information propagation speed on a
//! bidirectional highway with cluster-cooperative radios.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ips_core::experiment::{self, ResolvedConfig};
use ips_core::Error;

#[derive(Parser)]
#[command(
    name = "ips",
    version,
    about = "Information propagation speed on a cooperative vehicular highway",
    long_about = "Computes the information propagation speed of a bidirectional \
                  1-D vehicular network in which clustered vehicles cooperate as \
                  virtual antenna arrays, via closed-form analysis and independent \
                  Monte-Carlo simulation. Experiments are described by flat \
                  `key = value` config files; run `ips validate <config>` to see \
                  every key with its resolved value."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write <scenario>.csv, summary.json and
    /// resolved_config.txt into the output directory.
    Run {
        /// Path to a `key = value` config file.
        config: PathBuf,
        /// Override sim.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override sim.replicates.
        #[arg(long)]
        replicates: Option<u32>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        output: PathBuf,
    },
    /// Parse a config and print its fully resolved form to stdout.
    Validate {
        /// Path to a `key = value` config file.
        config: PathBuf,
    },
}

fn read_config(path: &PathBuf) -> ips_core::Result<ResolvedConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ResolvedConfig::from_text(&text)
}

fn real_main() -> ips_core::Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, replicates, jobs, output } => {
            let mut cfg = read_config(&config)?;
            cfg.apply_overrides(seed, replicates);
            let report = experiment::run(&cfg, &output, jobs)?;
            println!("scenario      {}", report.scenario);
            println!("rows          {}", report.rows);
            println!("config hash   {}", report.config_hash);
            println!("table         {}", report.table.display());
            println!("summary       {}", report.summary.display());
            println!("resolved      {}", report.resolved.display());
        }
        Command::Validate { config } => {
            let cfg = read_config(&config)?;
            print!("{}", cfg.resolved_text());
            eprintln!("ok: {} is valid", config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

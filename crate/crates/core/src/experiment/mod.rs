//! Experiment layer: flat `key = value` configs resolved against defaults,
//! and a scenario runner that writes deterministic CSV/JSON outputs.

pub mod config;
pub mod runner;

pub use config::{fnv1a_hex, ResolvedConfig, Scenario};
pub use runner::{linear_fit, run, RunReport};

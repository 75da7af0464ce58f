//! Closed-form and Monte-Carlo toolkit for information propagation speed (IPS)
//! on a bidirectional 1-D highway where vehicle clusters cooperate as virtual
//! antenna arrays to extend one-hop radio range.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`] — special functions, reproducible RNG streams, quadrature,
//!   series truncation.
//! * [`channel`] — Rician outage, single-vehicle range, virtual-MIMO range,
//!   the gain function `F(N_r)` with its generalized inverses, and a
//!   Monte-Carlo outage oracle.
//! * [`analytics`] — the renewal-reward IPS pipeline: cluster-size law,
//!   bridge-distance transform, unbridged-gap law, blocking time, forward
//!   distance, transmission time, and the assembled speed.
//! * [`simulator`] — an independent discrete-event realization of the same
//!   system model, used to validate every analytic quantity.
//! * [`experiment`] — config parsing and the sweep runner behind the CLI.

pub mod analytics;
pub mod channel;
pub mod experiment;
pub mod numerics;
pub mod simulator;

pub use analytics::{IpsBreakdown, ProtocolConfig, TrafficConfig};
pub use channel::{ChannelConfig, RangeModel};
pub use numerics::rng::RngStream;
pub use simulator::{BlockScenario, IpsEstimate, SimConfig, SimMode, StopRule};

/// Unified error type. Sweep code must keep running across phase transitions,
/// so degenerate regimes and numeric trouble are typed rather than panicking.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature failed to converge; carries the partial estimate.
    #[error("quadrature did not converge ({detail}); partial estimate {partial:e}")]
    Quadrature { partial: f64, detail: String },

    /// A series failed to meet its tolerance within the hard term cap.
    #[error("series truncation cap exceeded; partial sum {partial:e}")]
    SeriesCap { partial: f64 },

    /// The model entered a regime where the requested quantity is undefined
    /// (e.g. fully connected network, saturated outage).
    #[error("degenerate regime: {0}")]
    Degenerate(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A simulation estimate could not be formed (e.g. every replicate censored).
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI contract: 2 config, 3 numeric/estimation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}

//! Deterministic discrete-event simulation of a small sensor network.
//!
//! The channel is a single broadcast medium with a fixed propagation delay,
//! no loss and no collisions. A legitimate wake-up signal is heard by the
//! sender's neighbors and by the adversary; an adversary replay is heard by
//! every node. Identical configuration and seed give an identical trace.

mod adversary;
mod baseline;
mod engine;

use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::node::NodeError;
use crate::otp::OtpError;
use crate::trace::Trace;

pub use adversary::{adversary_step, Adversary, ScheduledReplay};
pub use baseline::{duty_cycle_energy, duty_cycle_period_charges, DutyNode, ExchangeNode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario:\n{0}")]
    Config(#[from] ConfigError),
    #[error("simulator fault: {0}")]
    Node(#[from] NodeError),
    #[error("simulator fault: {0}")]
    Otp(#[from] OtpError),
}

/// Validates `cfg` and runs it to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace, SimError> {
    cfg.validate()?;
    engine::Engine::new(cfg)?.run()
}

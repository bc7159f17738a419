//! Time-slot one-time-password wake-up authentication for wireless sensor
//! networks.
//!
//! Nodes sleep by default. An always-on wake-up receiver holds the token for
//! the current time slot, `TEA_K(counter)` under the node's own key, and wakes
//! the node only on the first matching token of each slot. Senders compute
//! the same token from their synchronized clock, so no token ever has to be
//! distributed over the air.
//!
//! The [`simnet`] module simulates the scheme, the token-exchange scheme it
//! replaces, and a duty-cycle baseline, charging every joule to per-node
//! [`energy`] ledgers.

pub mod cipher;
pub mod cli;
pub mod config;
pub mod energy;
pub mod node;
pub mod otp;
pub mod scenarios;
pub mod simnet;
pub mod summary;
pub mod trace;

pub use cipher::{derive_node_key, tea_decrypt, tea_encrypt, Block64, Key128, NodeId};
pub use config::{ScenarioConfig, Scheme};
pub use energy::{Category, Energy, EnergyLedger, EnergyParams};
pub use node::{Mode, NodeState};
pub use otp::{generate_token, slot_index, SlotConfig, SlotIndex, Token, WakeDecision, WurState};
pub use simnet::run_scenario;
pub use summary::RunSummary;
pub use trace::{Trace, TraceEvent};

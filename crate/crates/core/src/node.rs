//! Per-node protocol state machine.
//!
//! A node sleeps by default and is woken by one of three interrupts: a sensor
//! reading, an accepted token at the wake-up receiver, or the MCU's token
//! refresh at each slot boundary. Energy is not charged here; callers charge
//! the ledger from the transitions these methods report.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::{derive_node_key, Key128, NodeId};
use crate::otp::{
    generate_token, slot_index, OtpError, SlotConfig, SlotIndex, Token, WakeDecision, WurState,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NodeError {
    #[error("node {node} lists neighbor {neighbor} more than once")]
    DuplicateNeighbor { node: NodeId, neighbor: NodeId },
    #[error("node {0} lists itself as a neighbor")]
    SelfNeighbor(NodeId),
    #[error("node {node} has no key for {dest}: not a neighbor")]
    UnknownNeighbor { node: NodeId, dest: NodeId },
    #[error("node {node} at slot {current} was handed boundary {requested}; boundaries must be processed in order")]
    SkippedBoundary {
        node: NodeId,
        current: SlotIndex,
        requested: SlotIndex,
    },
    #[error("node {0} asked to finish an exchange while sleeping")]
    NotActive(NodeId),
    #[error(transparent)]
    Otp(#[from] OtpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Sleeping,
    Active,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sleeping => "Sleeping",
            Mode::Active => "Active",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "Sleeping" => Some(Mode::Sleeping),
            "Active" => Some(Mode::Active),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Data waiting to be sent once the destination is awake. The payload itself
/// is opaque; only its length matters, for energy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outbound {
    pub dest: NodeId,
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interrupt {
    Sensor { reading: u64, outbound: Outbound },
    WakeupReceiver { token: Token },
    TokenRefresh { slot: SlotIndex },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WakeSignal {
    pub from: NodeId,
    pub dest: NodeId,
    pub token: Token,
    pub slot: SlotIndex,
}

/// What handling an interrupt did to the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    /// A sensor reading produced a wake request to transmit.
    Transmit { signal: WakeSignal, switched: bool },
    /// The wake-up receiver compared an incoming token.
    Decided {
        decision: WakeDecision,
        switched: bool,
    },
    /// A new token was computed and loaded.
    Refreshed { token: Token },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    id: NodeId,
    mode: Mode,
    own_key: Key128,
    neighbor_keys: BTreeMap<NodeId, Key128>,
    wur: WurState,
    pending: Option<Outbound>,
}

impl NodeState {
    /// Derives the node's own key and every neighbor key from the master
    /// secret, loads the current slot's token and goes to sleep.
    pub fn initialize(
        id: NodeId,
        master: Key128,
        neighbor_ids: &[NodeId],
        cfg: &SlotConfig,
        now_ms: u64,
    ) -> Result<Self, NodeError> {
        let mut neighbor_keys = BTreeMap::new();
        for &n in neighbor_ids {
            if n == id {
                return Err(NodeError::SelfNeighbor(id));
            }
            if neighbor_keys
                .insert(n, derive_node_key(master, n))
                .is_some()
            {
                return Err(NodeError::DuplicateNeighbor {
                    node: id,
                    neighbor: n,
                });
            }
        }
        let own_key = derive_node_key(master, id);
        let slot = slot_index(now_ms, cfg)?;
        Ok(NodeState {
            id,
            mode: Mode::Sleeping,
            own_key,
            neighbor_keys,
            wur: WurState::new(generate_token(own_key, slot), slot),
            pending: None,
        })
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn own_key(&self) -> Key128 {
        self.own_key
    }

    pub fn neighbor_keys(&self) -> &BTreeMap<NodeId, Key128> {
        &self.neighbor_keys
    }

    pub fn wur(&self) -> &WurState {
        &self.wur
    }

    pub fn pending(&self) -> Option<Outbound> {
        self.pending
    }

    pub fn handle(
        &mut self,
        interrupt: Interrupt,
        now_ms: u64,
        cfg: &SlotConfig,
    ) -> Result<Response, NodeError> {
        match interrupt {
            Interrupt::Sensor { outbound, .. } => {
                self.pending = Some(outbound);
                let was = self.mode;
                let signal = self.initiate_wakeup(outbound.dest, now_ms, cfg)?;
                Ok(Response::Transmit {
                    signal,
                    switched: was != self.mode,
                })
            }
            Interrupt::WakeupReceiver { token } => {
                let was = self.mode;
                let decision = self.receive_wake(token);
                Ok(Response::Decided {
                    decision,
                    switched: was != self.mode,
                })
            }
            Interrupt::TokenRefresh { slot } => {
                let token = self.on_slot_boundary(slot)?;
                Ok(Response::Refreshed { token })
            }
        }
    }

    /// Refreshes the stored token when a slot expires. The mode is unchanged.
    pub fn on_slot_boundary(&mut self, new_slot: SlotIndex) -> Result<Token, NodeError> {
        let current = self.wur.slot();
        if new_slot != current.next() {
            return Err(NodeError::SkippedBoundary {
                node: self.id,
                current,
                requested: new_slot,
            });
        }
        let token = generate_token(self.own_key, new_slot);
        self.wur.load(token, new_slot)?;
        Ok(token)
    }

    /// Computes the token `dest` expects in the current slot and becomes
    /// active to transmit it.
    pub fn initiate_wakeup(
        &mut self,
        dest: NodeId,
        now_ms: u64,
        cfg: &SlotConfig,
    ) -> Result<WakeSignal, NodeError> {
        let key = *self
            .neighbor_keys
            .get(&dest)
            .ok_or(NodeError::UnknownNeighbor {
                node: self.id,
                dest,
            })?;
        let slot = slot_index(now_ms, cfg)?;
        self.mode = Mode::Active;
        if self.pending.is_some_and(|p| p.dest == dest) {
            self.pending = None;
        }
        Ok(WakeSignal {
            from: self.id,
            dest,
            token: generate_token(key, slot),
            slot,
        })
    }

    /// Runs the wake-up receiver check; only `Accept` wakes the node.
    pub fn receive_wake(&mut self, incoming: Token) -> WakeDecision {
        let decision = self.wur.check(incoming);
        if decision.wakes() {
            self.mode = Mode::Active;
        }
        decision
    }

    /// Goes back to sleep. The single-use guard keeps its state: a token
    /// consumed earlier in this slot stays consumed.
    pub fn complete_exchange(&mut self) -> Result<(), NodeError> {
        if self.mode != Mode::Active {
            return Err(NodeError::NotActive(self.id));
        }
        self.mode = Mode::Sleeping;
        Ok(())
    }
}

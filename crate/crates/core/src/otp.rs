//! Time slots, counter tokens and the wake-up receiver's single-use check.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::{tea_encrypt, Block64, Key128};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OtpError {
    #[error("slot duration must be at least 1 ms")]
    ZeroSlotDuration,
    #[error("clock reads {now_ms} ms, before the slot epoch at {epoch_ms} ms")]
    BeforeEpoch { now_ms: u64, epoch_ms: u64 },
    #[error(
        "refusing to load a token for slot {requested} into a receiver already at slot {current}"
    )]
    SlotRegression { current: u64, requested: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotConfig {
    slot_duration_ms: u64,
    epoch_ms: u64,
}

impl SlotConfig {
    pub fn new(slot_duration_ms: u64, epoch_ms: u64) -> Result<Self, OtpError> {
        if slot_duration_ms == 0 {
            return Err(OtpError::ZeroSlotDuration);
        }
        Ok(SlotConfig {
            slot_duration_ms,
            epoch_ms,
        })
    }

    pub fn slot_duration_ms(&self) -> u64 {
        self.slot_duration_ms
    }

    pub fn epoch_ms(&self) -> u64 {
        self.epoch_ms
    }

    /// Start time of `slot`.
    pub fn slot_start(&self, slot: SlotIndex) -> u64 {
        self.epoch_ms + slot.0 * self.slot_duration_ms
    }
}

/// The synchronized counter value.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SlotIndex(pub u64);

impl SlotIndex {
    pub fn next(self) -> SlotIndex {
        SlotIndex(self.0 + 1)
    }
}

impl fmt::Display for SlotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An encrypted-counter wake-up token.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(Block64);

impl Token {
    pub fn value(self) -> Block64 {
        self.0
    }

    /// Rebuilds a token observed on the channel (e.g. parsed from a trace).
    /// Nothing verifies that the block really is an encrypted counter.
    pub fn from_wire(block: Block64) -> Token {
        Token(block)
    }

    pub fn to_hex(self) -> String {
        self.0.to_hex()
    }

    /// Bit equality without an early exit on the first differing bit.
    pub fn matches(self, other: Token) -> bool {
        (self.0 .0 ^ other.0 .0) == 0
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({})", self.0.to_hex())
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_hex())
    }
}

pub fn slot_index(now_ms: u64, cfg: &SlotConfig) -> Result<SlotIndex, OtpError> {
    let elapsed = now_ms
        .checked_sub(cfg.epoch_ms)
        .ok_or(OtpError::BeforeEpoch {
            now_ms,
            epoch_ms: cfg.epoch_ms,
        })?;
    Ok(SlotIndex(elapsed / cfg.slot_duration_ms))
}

/// Big-endian 64-bit encoding of the counter, filling the whole block.
pub fn encode_counter(slot: SlotIndex) -> Block64 {
    Block64(slot.0)
}

pub fn generate_token(dest_key: Key128, slot: SlotIndex) -> Token {
    Token(tea_encrypt(encode_counter(slot), dest_key))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WakeDecision {
    Accept,
    RejectConsumed,
    RejectMismatch,
}

impl WakeDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            WakeDecision::Accept => "Accept",
            WakeDecision::RejectConsumed => "RejectConsumed",
            WakeDecision::RejectMismatch => "RejectMismatch",
        }
    }

    pub fn parse(s: &str) -> Option<WakeDecision> {
        match s {
            "Accept" => Some(WakeDecision::Accept),
            "RejectConsumed" => Some(WakeDecision::RejectConsumed),
            "RejectMismatch" => Some(WakeDecision::RejectMismatch),
            _ => None,
        }
    }

    pub fn wakes(self) -> bool {
        self == WakeDecision::Accept
    }
}

impl fmt::Display for WakeDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the always-on wake-up receiver holds while the node sleeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WurState {
    expected: Token,
    slot: SlotIndex,
    consumed: bool,
}

impl WurState {
    pub fn new(expected: Token, slot: SlotIndex) -> Self {
        WurState {
            expected,
            slot,
            consumed: false,
        }
    }

    pub fn expected(&self) -> Token {
        self.expected
    }

    pub fn slot(&self) -> SlotIndex {
        self.slot
    }

    pub fn consumed(&self) -> bool {
        self.consumed
    }

    /// Stores the token for `slot` and re-arms the single-use guard.
    pub fn load(&mut self, token: Token, slot: SlotIndex) -> Result<(), OtpError> {
        if slot < self.slot {
            return Err(OtpError::SlotRegression {
                current: self.slot.0,
                requested: slot.0,
            });
        }
        *self = WurState::new(token, slot);
        Ok(())
    }

    /// Compares an incoming token against the stored one. At most one
    /// `Accept` is returned between two loads.
    pub fn check(&mut self, incoming: Token) -> WakeDecision {
        if !self.expected.matches(incoming) {
            WakeDecision::RejectMismatch
        } else if self.consumed {
            WakeDecision::RejectConsumed
        } else {
            self.consumed = true;
            WakeDecision::Accept
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{derive_node_key, NodeId};

    fn cfg(d: u64) -> SlotConfig {
        SlotConfig::new(d, 0).unwrap()
    }

    #[test]
    fn slot_index_floor() {
        assert_eq!(slot_index(0, &cfg(100)).unwrap(), SlotIndex(0));
        assert_eq!(slot_index(99, &cfg(100)).unwrap(), SlotIndex(0));
        assert_eq!(slot_index(100, &cfg(100)).unwrap(), SlotIndex(1));
        assert_eq!(slot_index(1050, &cfg(250)).unwrap(), SlotIndex(4));
    }

    #[test]
    fn slot_index_before_epoch() {
        let c = SlotConfig::new(100, 500).unwrap();
        assert_eq!(
            slot_index(499, &c),
            Err(OtpError::BeforeEpoch {
                now_ms: 499,
                epoch_ms: 500
            })
        );
        assert_eq!(slot_index(600, &c).unwrap(), SlotIndex(1));
    }

    #[test]
    fn zero_duration_rejected() {
        assert_eq!(SlotConfig::new(0, 0), Err(OtpError::ZeroSlotDuration));
    }

    #[test]
    fn counter_encoding() {
        assert_eq!(encode_counter(SlotIndex(0)), Block64(0));
        assert_eq!(encode_counter(SlotIndex(1)), Block64(1));
        assert_eq!(
            encode_counter(SlotIndex(1 << 32)),
            Block64(0x0000_0001_0000_0000)
        );
        assert_eq!(
            encode_counter(SlotIndex(1 << 32)).to_hex(),
            "0000000100000000"
        );
    }

    #[test]
    fn zero_key_slot_zero_token() {
        let t = generate_token(Key128::ZERO, SlotIndex(0));
        assert_eq!(t.value(), Block64(0x41ea_3a0a_94ba_a940));
    }

    #[test]
    fn load_and_check() {
        let k = derive_node_key(Key128::ZERO, NodeId(1));
        let t = generate_token(k, SlotIndex(5));
        let mut w = WurState::new(generate_token(k, SlotIndex(3)), SlotIndex(3));
        w.load(t, SlotIndex(5)).unwrap();
        assert_eq!(
            w,
            WurState {
                expected: t,
                slot: SlotIndex(5),
                consumed: false
            }
        );
        assert_eq!(w.check(t), WakeDecision::Accept);
        assert!(w.consumed());
        assert_eq!(w.check(t), WakeDecision::RejectConsumed);
    }

    #[test]
    fn load_into_past_slot_fails() {
        let t = generate_token(Key128::ZERO, SlotIndex(5));
        let mut w = WurState::new(t, SlotIndex(5));
        assert_eq!(
            w.load(generate_token(Key128::ZERO, SlotIndex(4)), SlotIndex(4)),
            Err(OtpError::SlotRegression {
                current: 5,
                requested: 4
            })
        );
    }

    #[test]
    fn foreign_key_mismatch() {
        let a = derive_node_key(Key128::ZERO, NodeId(1));
        let b = derive_node_key(Key128::ZERO, NodeId(2));
        let mine = generate_token(a, SlotIndex(9));
        let other = generate_token(b, SlotIndex(9));
        assert_ne!(mine, other);
        let mut w = WurState::new(mine, SlotIndex(9));
        assert_eq!(w.check(other), WakeDecision::RejectMismatch);
        assert!(!w.consumed());
    }

    #[test]
    fn reload_same_slot_rearms() {
        let t = generate_token(Key128::ZERO, SlotIndex(2));
        let mut w = WurState::new(t, SlotIndex(2));
        assert!(w.check(t).wakes());
        w.load(t, SlotIndex(2)).unwrap();
        assert!(!w.consumed());
    }
}

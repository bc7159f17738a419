//! TEA block cipher and per-node key derivation.
//!
//! This is the original Wheeler-Needham TEA: 64-bit blocks, 128-bit keys,
//! 32 cycles (64 Feistel half-rounds) with the golden-ratio delta. TEA has
//! equivalent keys (flipping the top bit of two key words yields the same
//! cipher); that weakness is not mitigated here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DELTA: u32 = 0x9E37_79B9;
const CYCLES: u32 = 32;
const DECRYPT_SUM: u32 = DELTA.wrapping_mul(CYCLES);

/// XORed into the node id to form the second key-derivation block.
pub const KEY_DERIVATION_DOMAIN: u64 = 0xA5A5_A5A5_A5A5_A5A5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HexError {
    #[error("expected {expected} hex characters, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("invalid hex string: {0}")]
    Digit(#[from] hex::FromHexError),
}

/// A 128-bit TEA key, held as four big-endian 32-bit words.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Key128([u32; 4]);

impl Key128 {
    pub const ZERO: Key128 = Key128([0; 4]);

    pub const fn from_words(words: [u32; 4]) -> Self {
        Key128(words)
    }

    pub const fn words(&self) -> [u32; 4] {
        self.0
    }

    pub fn from_u128(value: u128) -> Self {
        Key128([
            (value >> 96) as u32,
            (value >> 64) as u32,
            (value >> 32) as u32,
            value as u32,
        ])
    }

    pub fn to_u128(&self) -> u128 {
        self.0
            .iter()
            .fold(0u128, |acc, w| (acc << 32) | u128::from(*w))
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self::from_u128(u128::from_be_bytes(bytes))
    }

    pub fn to_bytes(&self) -> [u8; 16] {
        self.to_u128().to_be_bytes()
    }

    /// Parses exactly 32 hex characters, big-endian.
    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        let mut bytes = [0u8; 16];
        decode_exact(s, &mut bytes)?;
        Ok(Self::from_bytes(bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

impl fmt::Debug for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key128({})", self.to_hex())
    }
}

impl fmt::Display for Key128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Key128 {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

/// A 64-bit cipher block. The high word is TEA's `v0`, the low word `v1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Block64(pub u64);

impl Block64 {
    pub const ZERO: Block64 = Block64(0);
    pub const ONES: Block64 = Block64(u64::MAX);

    pub const fn from_halves(v0: u32, v1: u32) -> Self {
        Block64(((v0 as u64) << 32) | v1 as u64)
    }

    pub const fn halves(self) -> (u32, u32) {
        ((self.0 >> 32) as u32, self.0 as u32)
    }

    /// Parses exactly 16 hex characters, big-endian.
    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        let mut bytes = [0u8; 8];
        decode_exact(s, &mut bytes)?;
        Ok(Block64(u64::from_be_bytes(bytes)))
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }
}

impl fmt::Debug for Block64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block64({:016x})", self.0)
    }
}

impl fmt::Display for Block64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Block64 {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

fn decode_exact(s: &str, out: &mut [u8]) -> Result<(), HexError> {
    if s.len() != out.len() * 2 {
        return Err(HexError::Length {
            expected: out.len() * 2,
            actual: s.len(),
        });
    }
    hex::decode_to_slice(s, out)?;
    Ok(())
}

/// Node identifier assigned by the data sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn tea_encrypt(plaintext: Block64, key: Key128) -> Block64 {
    let (mut v0, mut v1) = plaintext.halves();
    let [k0, k1, k2, k3] = key.0;
    let mut sum: u32 = 0;
    for _ in 0..CYCLES {
        sum = sum.wrapping_add(DELTA);
        v0 = v0.wrapping_add(
            (v1 << 4).wrapping_add(k0) ^ v1.wrapping_add(sum) ^ (v1 >> 5).wrapping_add(k1),
        );
        v1 = v1.wrapping_add(
            (v0 << 4).wrapping_add(k2) ^ v0.wrapping_add(sum) ^ (v0 >> 5).wrapping_add(k3),
        );
    }
    Block64::from_halves(v0, v1)
}

pub fn tea_decrypt(ciphertext: Block64, key: Key128) -> Block64 {
    let (mut v0, mut v1) = ciphertext.halves();
    let [k0, k1, k2, k3] = key.0;
    let mut sum = DECRYPT_SUM;
    for _ in 0..CYCLES {
        v1 = v1.wrapping_sub(
            (v0 << 4).wrapping_add(k2) ^ v0.wrapping_add(sum) ^ (v0 >> 5).wrapping_add(k3),
        );
        v0 = v0.wrapping_sub(
            (v1 << 4).wrapping_add(k0) ^ v1.wrapping_add(sum) ^ (v1 >> 5).wrapping_add(k1),
        );
        sum = sum.wrapping_sub(DELTA);
    }
    Block64::from_halves(v0, v1)
}

/// Derives a node key from the network master key.
///
/// The key is `TEA_M(id) || TEA_M(id ^ 0xA5A5A5A5A5A5A5A5)`. Both halves are
/// images of distinct plaintexts under one fixed-key permutation, so distinct
/// ids always yield distinct keys. This is a deterministic construction built
/// from the only cipher available on the node, not a general-purpose KDF.
pub fn derive_node_key(master: Key128, id: NodeId) -> Key128 {
    let id = u64::from(id.0);
    let (a0, a1) = tea_encrypt(Block64(id), master).halves();
    let (b0, b1) = tea_encrypt(Block64(id ^ KEY_DERIVATION_DOMAIN), master).halves();
    Key128([a0, a1, b0, b1])
}

//! Comparison node models: the token-exchange door-keeper scheme and plain
//! duty cycling.

use std::collections::BTreeMap;

use crate::cipher::NodeId;
use crate::energy::{scheduled_wakeup_energy, Category, Energy, EnergyParams};
use crate::node::{Mode, NodeError, Outbound};
use crate::otp::{Token, WakeDecision};

/// A node of the token-exchange scheme.
///
/// Tokens are handed out over the air at initialization. After a token has
/// been used on the channel the receiver rotates to a fresh one and tells
/// only the peer it is talking to; neighbors that slept through the rotation
/// keep the stale token and are rejected on their next attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeNode {
    id: NodeId,
    mode: Mode,
    active: Token,
    consumed: bool,
    known: BTreeMap<NodeId, Token>,
}

impl ExchangeNode {
    pub fn new(id: NodeId, initial: Token) -> Self {
        ExchangeNode {
            id,
            mode: Mode::Sleeping,
            active: initial,
            consumed: false,
            known: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn active_token(&self) -> Token {
        self.active
    }

    pub fn known_token(&self, peer: NodeId) -> Option<Token> {
        self.known.get(&peer).copied()
    }

    /// Stores a token announced by `peer`.
    pub fn learn(&mut self, peer: NodeId, token: Token) {
        self.known.insert(peer, token);
    }

    /// Wakes up and returns the token last learned from `dest`.
    pub fn initiate_wakeup(&mut self, dest: NodeId) -> Result<Token, NodeError> {
        let token = self.known_token(dest).ok_or(NodeError::UnknownNeighbor {
            node: self.id,
            dest,
        })?;
        self.mode = Mode::Active;
        Ok(token)
    }

    pub fn receive_wake(&mut self, incoming: Token) -> WakeDecision {
        if !self.active.matches(incoming) {
            WakeDecision::RejectMismatch
        } else if self.consumed {
            WakeDecision::RejectConsumed
        } else {
            self.consumed = true;
            self.mode = Mode::Active;
            WakeDecision::Accept
        }
    }

    /// Replaces the exposed active token.
    pub fn rotate(&mut self, fresh: Token) {
        self.active = fresh;
        self.consumed = false;
    }

    pub fn complete_exchange(&mut self) -> Result<(), NodeError> {
        if self.mode != Mode::Active {
            return Err(NodeError::NotActive(self.id));
        }
        self.mode = Mode::Sleeping;
        Ok(())
    }
}

/// A duty-cycled node without a wake-up receiver. Readings wait for the next
/// scheduled wakeup, whose transceive budget already covers them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DutyNode {
    id: NodeId,
    mode: Mode,
    queued: Vec<Outbound>,
}

impl DutyNode {
    pub fn new(id: NodeId) -> Self {
        DutyNode {
            id,
            mode: Mode::Sleeping,
            queued: Vec::new(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn queue(&mut self, out: Outbound) {
        self.queued.push(out);
    }

    /// Scheduled wakeup; hands back everything queued since the last one.
    pub fn wake(&mut self) -> Vec<Outbound> {
        self.mode = Mode::Active;
        std::mem::take(&mut self.queued)
    }

    pub fn sleep(&mut self) -> Result<(), NodeError> {
        if self.mode != Mode::Active {
            return Err(NodeError::NotActive(self.id));
        }
        self.mode = Mode::Sleeping;
        Ok(())
    }
}

/// Per-category charges of one duty-cycle period. They sum to
/// [`scheduled_wakeup_energy`], whether or not any traffic exists.
pub fn duty_cycle_period_charges(p: &EnergyParams) -> [(Category, Energy); 3] {
    let charges = [
        (Category::ModeSwitch, p.switch_energy() * 2),
        (Category::ActiveDwell, p.active_dwell_energy()),
        (Category::Transceive, p.transceive_energy()),
    ];
    debug_assert_eq!(
        charges.iter().map(|c| c.1).sum::<Energy>(),
        scheduled_wakeup_energy(p)
    );
    charges
}

/// Duty-cycle energy charged over `horizon_ms`: one scheduled wakeup at the
/// start of every period.
pub fn duty_cycle_energy(p: &EnergyParams, period_ms: u64, horizon_ms: u64) -> Energy {
    scheduled_wakeup_energy(p) * horizon_ms.div_ceil(period_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::Block64;

    fn t(v: u64) -> Token {
        Token::from_wire(Block64(v))
    }

    #[test]
    fn single_sender_never_fails() {
        let mut rx = ExchangeNode::new(NodeId(1), t(10));
        let mut tx = ExchangeNode::new(NodeId(0), t(20));
        tx.learn(NodeId(1), rx.active_token());
        for round in 0..5u64 {
            let tok = tx.initiate_wakeup(NodeId(1)).unwrap();
            assert_eq!(rx.receive_wake(tok), WakeDecision::Accept, "round {round}");
            rx.rotate(t(100 + round));
            tx.learn(NodeId(1), rx.active_token());
            tx.complete_exchange().unwrap();
            rx.complete_exchange().unwrap();
        }
    }

    #[test]
    fn sleeping_peer_misses_rotation() {
        let mut n1 = ExchangeNode::new(NodeId(1), t(10));
        let mut n0 = ExchangeNode::new(NodeId(0), t(20));
        let mut n2 = ExchangeNode::new(NodeId(2), t(30));
        n0.learn(NodeId(1), n1.active_token());
        n2.learn(NodeId(1), n1.active_token());
        let a = n0.initiate_wakeup(NodeId(1)).unwrap();
        assert_eq!(n1.receive_wake(a), WakeDecision::Accept);
        n1.rotate(t(11));
        n0.learn(NodeId(1), n1.active_token());
        n1.complete_exchange().unwrap();
        let b = n2.initiate_wakeup(NodeId(1)).unwrap();
        assert_eq!(b, t(10));
        assert_eq!(n1.receive_wake(b), WakeDecision::RejectMismatch);
        assert_eq!(n1.mode(), Mode::Sleeping);
    }

    #[test]
    fn unknown_peer() {
        let mut n = ExchangeNode::new(NodeId(0), t(1));
        assert!(matches!(
            n.initiate_wakeup(NodeId(5)),
            Err(NodeError::UnknownNeighbor { .. })
        ));
    }

    #[test]
    fn period_charges_sum_to_scheduled_energy() {
        let p = EnergyParams::default();
        let sum: Energy = duty_cycle_period_charges(&p).iter().map(|c| c.1).sum();
        assert_eq!(sum, scheduled_wakeup_energy(&p));
    }

    #[test]
    fn halving_period_doubles_energy() {
        let p = EnergyParams::default();
        let e1 = duty_cycle_energy(&p, 1_000, 100_000);
        let e2 = duty_cycle_energy(&p, 500, 100_000);
        assert_eq!(e2, e1 * 2);
    }

    #[test]
    fn duty_node_queues_until_wake() {
        let mut d = DutyNode::new(NodeId(0));
        d.queue(Outbound {
            dest: NodeId(1),
            payload_bytes: 8,
        });
        assert_eq!(d.wake().len(), 1);
        assert!(d.wake().is_empty());
        d.sleep().unwrap();
        assert!(d.sleep().is_err());
    }
}

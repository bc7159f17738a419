use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use crate::cipher::{Block64, NodeId};
use crate::config::{ScenarioConfig, Scheme};
use crate::energy::{Category, EnergyLedger, EnergyParams};
use crate::node::{Interrupt, Mode, NodeState, Outbound, Response};
use crate::otp::{slot_index, SlotConfig, SlotIndex, Token, WakeDecision};
use crate::trace::{Actor, Counters, EventKind, Outcome, Trace, TraceEvent};

use super::adversary::Adversary;
use super::baseline::{DutyNode, ExchangeNode};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Origin {
    Node(NodeId),
    Adversary,
}

#[derive(Debug, Clone)]
enum Action {
    SlotBoundary(SlotIndex),
    DutyWake,
    Sensor {
        src: NodeId,
        reading: u64,
        outbound: Outbound,
    },
    WakeArrival {
        origin: Origin,
        token: Token,
        dest: Option<NodeId>,
    },
    DataTx {
        origin: Origin,
        dest: Option<NodeId>,
        bytes: u32,
    },
    DataArrival {
        origin: Origin,
        dest: Option<NodeId>,
        bytes: u32,
    },
    AckArrival {
        from: NodeId,
        to: NodeId,
    },
    TokenShareArrival {
        from: NodeId,
        to: NodeId,
        token: Token,
    },
    Sleep {
        node: NodeId,
        generation: u64,
    },
    Replay {
        token: Token,
    },
}

/// Queue entry. Ordered by time, then slot bookkeeping before anything else
/// at the same instant, then wake arrivals by lower sender id, then insertion.
#[derive(Debug)]
struct Queued {
    time: u64,
    class: u8,
    rank: u64,
    seq: u64,
    action: Action,
}

impl Queued {
    fn key(&self) -> (u64, u8, u64, u64) {
        (self.time, self.class, self.rank, self.seq)
    }
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Debug, Clone)]
enum Protocol {
    Otp(NodeState),
    Exchange(ExchangeNode),
    Duty(DutyNode),
}

#[derive(Debug, Clone)]
struct SimNode {
    neighbors: Vec<NodeId>,
    protocol: Protocol,
    accrued_to: u64,
    sleep_at: u64,
    generation: u64,
    /// Who this node accepted its current wake from.
    session: Option<Origin>,
}

impl SimNode {
    fn mode(&self) -> Mode {
        match &self.protocol {
            Protocol::Otp(n) => n.mode(),
            Protocol::Exchange(n) => n.mode(),
            Protocol::Duty(n) => n.mode(),
        }
    }
}

pub(super) struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    params: &'a EnergyParams,
    slots: SlotConfig,
    start: u64,
    end: u64,
    queue: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
    nodes: BTreeMap<NodeId, SimNode>,
    ledger: EnergyLedger,
    events: Vec<TraceEvent>,
    counters: Counters,
    adversary: Adversary,
    rng: ChaCha8Rng,
}

const CLASS_BOOKKEEPING: u8 = 0;
const CLASS_OTHER: u8 = 1;

impl<'a> Engine<'a> {
    pub(super) fn new(cfg: &'a ScenarioConfig) -> Result<Self, SimError> {
        let slots = SlotConfig::new(cfg.slot_duration_ms, cfg.slot_epoch_ms)?;
        let start = cfg.slot_epoch_ms;
        let end = start + cfg.duration_ms;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut nodes = BTreeMap::new();
        for spec in &cfg.nodes {
            let protocol = match cfg.scheme {
                Scheme::Otp => Protocol::Otp(NodeState::initialize(
                    spec.id,
                    cfg.master_key,
                    &spec.neighbors,
                    &slots,
                    start,
                )?),
                Scheme::TokenExchange => {
                    Protocol::Exchange(ExchangeNode::new(spec.id, fresh_token(&mut rng)))
                }
                Scheme::DutyCycle => Protocol::Duty(DutyNode::new(spec.id)),
            };
            let mut neighbors = spec.neighbors.clone();
            neighbors.sort();
            nodes.insert(
                spec.id,
                SimNode {
                    neighbors,
                    protocol,
                    accrued_to: start,
                    sleep_at: start,
                    generation: 0,
                    session: None,
                },
            );
        }
        Ok(Engine {
            cfg,
            params: &cfg.energy,
            slots,
            start,
            end,
            queue: BinaryHeap::new(),
            next_seq: 0,
            ledger: EnergyLedger::with_nodes(nodes.keys().copied()),
            nodes,
            events: Vec::new(),
            counters: Counters::default(),
            adversary: Adversary::new(cfg.adversary.clone()),
            rng,
        })
    }

    fn schedule(&mut self, time: u64, action: Action) {
        if time >= self.end {
            return;
        }
        let (class, rank) = match &action {
            Action::SlotBoundary(_) | Action::DutyWake => (CLASS_BOOKKEEPING, 0),
            Action::WakeArrival { origin, .. } => (
                CLASS_OTHER,
                match origin {
                    Origin::Node(id) => u64::from(id.0) + 1,
                    Origin::Adversary => u64::MAX,
                },
            ),
            _ => (CLASS_OTHER, 0),
        };
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued {
            time,
            class,
            rank,
            seq,
            action,
        }));
    }

    fn node(&self, id: NodeId) -> &SimNode {
        &self.nodes[&id]
    }

    fn node_mut(&mut self, id: NodeId) -> &mut SimNode {
        self.nodes.get_mut(&id).expect("node ids are validated")
    }

    /// Integrates the node's state power up to `now`.
    fn accrue(&mut self, id: NodeId, now: u64) {
        let p = self.params;
        let has_wur = self.cfg.scheme.has_wake_receiver();
        let node = self.nodes.get_mut(&id).expect("node ids are validated");
        let dt = now - node.accrued_to;
        node.accrued_to = now;
        if dt == 0 {
            return;
        }
        if has_wur {
            self.ledger
                .charge(id, Category::WurListen, p.listen_power().over(dt));
        }
        match node.mode() {
            Mode::Sleeping => self
                .ledger
                .charge(id, Category::McuSleep, p.sleep_power().over(dt)),
            Mode::Active => {
                self.ledger
                    .charge(id, Category::ActiveDwell, p.active_power().over(dt))
            }
        }
    }

    fn emit(
        &mut self,
        time: u64,
        actor: Actor,
        kind: EventKind,
        token: Option<Token>,
        outcome: Option<Outcome>,
        dest: Option<NodeId>,
    ) {
        let energy_total = actor.node().map(|id| self.ledger.total(id));
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            time_ms: time,
            seq,
            actor,
            kind,
            token,
            outcome,
            dest,
            energy_total,
        });
    }

    fn emit_mode(&mut self, time: u64, id: NodeId, mode: Mode) {
        self.emit(
            time,
            Actor::Node(id),
            EventKind::ModeChange,
            None,
            Some(Outcome::Mode(mode)),
            None,
        );
    }

    /// Keeps the node awake until at least `until`.
    fn stay_active(&mut self, id: NodeId, until: u64) {
        let node = self.node_mut(id);
        if until <= node.sleep_at {
            return;
        }
        node.sleep_at = node.sleep_at.max(until);
        node.generation += 1;
        let (at, generation) = (node.sleep_at, node.generation);
        self.schedule(
            at,
            Action::Sleep {
                node: id,
                generation,
            },
        );
    }

    fn charge(&mut self, id: NodeId, category: Category, amount: crate::energy::Energy) {
        self.ledger.charge(id, category, amount);
    }

    fn initialize(&mut self) -> Result<(), SimError> {
        let t = self.start;
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        match self.cfg.scheme {
            Scheme::Otp => {
                for &id in &ids {
                    self.charge(id, Category::TokenCompute, self.params.compute_energy());
                }
                let next = slot_index(t, &self.slots)?.next();
                self.schedule(self.slots.slot_start(next), Action::SlotBoundary(next));
            }
            Scheme::TokenExchange => {
                // Every node announces its token to its neighbors before the
                // first sleep.
                for &id in &ids {
                    let (token, neighbors) = match &self.node(id).protocol {
                        Protocol::Exchange(n) => {
                            (n.active_token(), self.node(id).neighbors.clone())
                        }
                        _ => unreachable!("scheme fixes the protocol"),
                    };
                    self.charge(id, Category::Transceive, self.params.transceive_energy());
                    self.emit(
                        t,
                        Actor::Node(id),
                        EventKind::TokenExchangeTx,
                        Some(token),
                        None,
                        None,
                    );
                    for m in neighbors {
                        self.charge(m, Category::Transceive, self.params.transceive_energy());
                        if let Protocol::Exchange(n) = &mut self.node_mut(m).protocol {
                            n.learn(id, token);
                        }
                        self.emit(
                            t,
                            Actor::Node(m),
                            EventKind::TokenExchangeRx,
                            Some(token),
                            None,
                            Some(m),
                        );
                    }
                }
            }
            Scheme::DutyCycle => self.schedule(t, Action::DutyWake),
        }
        for &id in &ids {
            self.emit_mode(t, id, Mode::Sleeping);
        }
        self.schedule_traffic();
        Ok(())
    }

    fn schedule_traffic(&mut self) {
        let bytes = self.cfg.payload_bytes;
        let mut reading = 0u64;
        for s in &self.cfg.sends {
            reading += 1;
            self.schedule(
                s.at_ms,
                Action::Sensor {
                    src: s.src,
                    reading,
                    outbound: Outbound {
                        dest: s.dest,
                        payload_bytes: bytes,
                    },
                },
            );
        }
        for (i, f) in self.cfg.flows.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(i as u64 + 1);
            let exp =
                Exp::new(1.0 / f.mean_interval_ms).expect("mean interval is validated positive");
            let mut t = self.start;
            loop {
                let gap: f64 = rng.sample(exp);
                t += (gap.round() as u64).max(1);
                if t >= self.end {
                    break;
                }
                reading += 1;
                self.schedule(
                    t,
                    Action::Sensor {
                        src: f.src,
                        reading,
                        outbound: Outbound {
                            dest: f.dest,
                            payload_bytes: bytes,
                        },
                    },
                );
            }
        }
    }

    pub(super) fn run(mut self) -> Result<Trace, SimError> {
        self.initialize()?;
        while let Some(Reverse(q)) = self.queue.pop() {
            self.dispatch(q.time, q.action)?;
        }
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        for id in ids {
            self.accrue(id, self.end);
        }
        Ok(Trace {
            events: self.events,
            ledger: self.ledger,
            counters: self.counters,
            start_ms: self.start,
            end_ms: self.end,
        })
    }

    fn dispatch(&mut self, now: u64, action: Action) -> Result<(), SimError> {
        match action {
            Action::SlotBoundary(slot) => self.on_slot_boundary(now, slot),
            Action::DutyWake => {
                self.on_duty_wake(now);
                Ok(())
            }
            Action::Sensor {
                src,
                reading,
                outbound,
            } => self.on_sensor(now, src, reading, outbound),
            Action::WakeArrival {
                origin,
                token,
                dest,
            } => {
                self.on_wake_arrival(now, origin, token, dest);
                Ok(())
            }
            Action::DataTx {
                origin,
                dest,
                bytes,
            } => {
                self.on_data_tx(now, origin, dest, bytes);
                Ok(())
            }
            Action::DataArrival {
                origin,
                dest,
                bytes,
            } => {
                self.on_data_arrival(now, origin, dest, bytes);
                Ok(())
            }
            Action::AckArrival { from, to } => {
                if self.node(to).mode() == Mode::Active {
                    self.accrue(to, now);
                    self.charge(to, Category::Transceive, self.params.transceive_energy());
                    self.emit(now, Actor::Node(to), EventKind::AckRx, None, None, Some(to));
                }
                let _ = from;
                Ok(())
            }
            Action::TokenShareArrival { from, to, token } => {
                if self.node(to).mode() == Mode::Active {
                    self.accrue(to, now);
                    self.charge(to, Category::Transceive, self.params.transceive_energy());
                    if let Protocol::Exchange(n) = &mut self.node_mut(to).protocol {
                        n.learn(from, token);
                    }
                    self.emit(
                        now,
                        Actor::Node(to),
                        EventKind::TokenExchangeRx,
                        Some(token),
                        None,
                        Some(to),
                    );
                }
                Ok(())
            }
            Action::Sleep { node, generation } => self.on_sleep(now, node, generation),
            Action::Replay { token } => {
                self.counters.adversary_attempts += 1;
                self.emit(
                    now,
                    Actor::Adversary,
                    EventKind::AdversaryReplay,
                    Some(token),
                    None,
                    None,
                );
                let d = self.cfg.propagation_delay_ms;
                self.schedule(
                    now + d,
                    Action::WakeArrival {
                        origin: Origin::Adversary,
                        token,
                        dest: None,
                    },
                );
                self.schedule(
                    now + d,
                    Action::DataTx {
                        origin: Origin::Adversary,
                        dest: None,
                        bytes: self.cfg.payload_bytes,
                    },
                );
                Ok(())
            }
        }
    }

    fn on_slot_boundary(&mut self, now: u64, slot: SlotIndex) -> Result<(), SimError> {
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        let refresh = self.params.wake_energy() + self.params.compute_energy();
        for id in ids {
            self.accrue(id, now);
            let slots = self.slots;
            let token = match &mut self.node_mut(id).protocol {
                Protocol::Otp(n) => {
                    match n.handle(Interrupt::TokenRefresh { slot }, now, &slots)? {
                        Response::Refreshed { token } => token,
                        other => unreachable!("refresh answered with {other:?}"),
                    }
                }
                _ => unreachable!("slot boundaries are only scheduled for the otp scheme"),
            };
            self.charge(id, Category::TokenCompute, refresh);
            self.emit(
                now,
                Actor::Node(id),
                EventKind::SlotBoundary,
                Some(token),
                None,
                None,
            );
        }
        let next = slot.next();
        self.schedule(self.slots.slot_start(next), Action::SlotBoundary(next));
        Ok(())
    }

    fn on_duty_wake(&mut self, now: u64) {
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        let dwell = self.params.t_active_ms;
        let d = self.cfg.propagation_delay_ms;
        for id in ids {
            self.accrue(id, now);
            let outgoing = match &mut self.node_mut(id).protocol {
                Protocol::Duty(n) => n.wake(),
                _ => unreachable!("duty wakes are only scheduled for the duty-cycle scheme"),
            };
            self.charge(id, Category::ModeSwitch, self.params.switch_energy());
            self.charge(id, Category::Transceive, self.params.transceive_energy());
            self.emit_mode(now, id, Mode::Active);
            for out in outgoing {
                self.emit(
                    now,
                    Actor::Node(id),
                    EventKind::DataTx,
                    None,
                    None,
                    Some(out.dest),
                );
                self.schedule(
                    now + d,
                    Action::DataArrival {
                        origin: Origin::Node(id),
                        dest: Some(out.dest),
                        bytes: out.payload_bytes,
                    },
                );
            }
            self.stay_active(id, now + dwell);
        }
        self.schedule(now + self.cfg.duty_cycle_period_ms, Action::DutyWake);
    }

    fn on_sensor(
        &mut self,
        now: u64,
        src: NodeId,
        reading: u64,
        outbound: Outbound,
    ) -> Result<(), SimError> {
        self.accrue(src, now);
        self.emit(
            now,
            Actor::Node(src),
            EventKind::SensorFire,
            None,
            None,
            Some(outbound.dest),
        );
        let dest = outbound.dest;
        let slots = self.slots;
        let (token, switched) = match &mut self.node_mut(src).protocol {
            Protocol::Duty(n) => {
                n.queue(outbound);
                return Ok(());
            }
            Protocol::Otp(n) => {
                match n.handle(Interrupt::Sensor { reading, outbound }, now, &slots)? {
                    Response::Transmit { signal, switched } => (signal.token, switched),
                    other => unreachable!("sensor answered with {other:?}"),
                }
            }
            Protocol::Exchange(n) => {
                let was = n.mode();
                let token = n.initiate_wakeup(dest)?;
                (token, was != n.mode())
            }
        };
        if switched {
            self.charge(src, Category::ModeSwitch, self.params.switch_energy());
            self.emit_mode(now, src, Mode::Active);
        }
        if self.cfg.scheme == Scheme::Otp {
            self.charge(src, Category::TokenCompute, self.params.compute_energy());
        }
        self.charge(src, Category::Transceive, self.params.transceive_energy());
        self.emit(
            now,
            Actor::Node(src),
            EventKind::WakeSignalTx,
            Some(token),
            None,
            Some(dest),
        );
        self.stay_active(src, now + self.params.t_active_ms);
        let d = self.cfg.propagation_delay_ms;
        self.schedule(
            now + d,
            Action::WakeArrival {
                origin: Origin::Node(src),
                token,
                dest: Some(dest),
            },
        );
        self.schedule(
            now + d,
            Action::DataTx {
                origin: Origin::Node(src),
                dest: Some(dest),
                bytes: outbound.payload_bytes,
            },
        );
        Ok(())
    }

    fn on_wake_arrival(&mut self, now: u64, origin: Origin, token: Token, dest: Option<NodeId>) {
        let listeners: Vec<NodeId> = match origin {
            Origin::Node(src) => {
                for r in self.adversary.capture(token, now, self.end) {
                    self.schedule(r.at_ms, Action::Replay { token: r.token });
                }
                self.node(src).neighbors.clone()
            }
            Origin::Adversary => self.nodes.keys().copied().collect(),
        };
        for r in listeners {
            self.accrue(r, now);
            self.emit(
                now,
                Actor::Node(r),
                EventKind::WakeSignalRx,
                Some(token),
                None,
                dest,
            );
            let (decision, switched) = match &mut self.node_mut(r).protocol {
                Protocol::Otp(n) => {
                    let was = n.mode();
                    let d = n.receive_wake(token);
                    (d, was != n.mode())
                }
                Protocol::Exchange(n) => {
                    let was = n.mode();
                    let d = n.receive_wake(token);
                    (d, was != n.mode())
                }
                Protocol::Duty(_) => unreachable!("duty-cycle nodes have no wake-up receiver"),
            };
            match decision {
                WakeDecision::Accept => {
                    self.counters.wakes_accepted += 1;
                    if origin == Origin::Adversary {
                        self.counters.adversary_successes += 1;
                    }
                }
                WakeDecision::RejectConsumed => self.counters.wakes_rejected_consumed += 1,
                WakeDecision::RejectMismatch => self.counters.wakes_rejected_mismatch += 1,
            }
            self.emit(
                now,
                Actor::Node(r),
                EventKind::WakeDecisionMade,
                Some(token),
                Some(Outcome::Decision(decision)),
                dest,
            );
            if decision.wakes() {
                if switched {
                    self.charge(r, Category::ModeSwitch, self.params.switch_energy());
                    self.emit_mode(now, r, Mode::Active);
                }
                self.node_mut(r).session = Some(origin);
                self.stay_active(r, now + self.params.t_active_ms);
            }
        }
    }

    fn on_data_tx(&mut self, now: u64, origin: Origin, dest: Option<NodeId>, bytes: u32) {
        let actor = match origin {
            Origin::Node(src) => {
                self.accrue(src, now);
                self.charge(src, Category::Transceive, self.params.frame_energy(bytes));
                Actor::Node(src)
            }
            Origin::Adversary => Actor::Adversary,
        };
        self.emit(now, actor, EventKind::DataTx, None, None, dest);
        self.schedule(
            now + self.cfg.propagation_delay_ms,
            Action::DataArrival {
                origin,
                dest,
                bytes,
            },
        );
    }

    fn on_data_arrival(&mut self, now: u64, origin: Origin, dest: Option<NodeId>, bytes: u32) {
        let candidates: Vec<NodeId> = match dest {
            Some(d) => vec![d],
            None => self.nodes.keys().copied().collect(),
        };
        let duty = self.cfg.scheme == Scheme::DutyCycle;
        for r in candidates {
            let node = self.node(r);
            let listening = node.mode() == Mode::Active && (duty || node.session == Some(origin));
            if !listening {
                continue;
            }
            self.accrue(r, now);
            if !duty {
                self.charge(r, Category::Transceive, self.params.frame_energy(bytes));
            }
            self.node_mut(r).session = None;
            self.emit(now, Actor::Node(r), EventKind::DataRx, None, None, Some(r));
            let Origin::Node(src) = origin else { continue };
            if duty {
                continue;
            }
            let d = self.cfg.propagation_delay_ms;
            if self.cfg.acks {
                self.charge(r, Category::Transceive, self.params.transceive_energy());
                self.emit(now, Actor::Node(r), EventKind::AckTx, None, None, Some(src));
                self.schedule(now + d, Action::AckArrival { from: r, to: src });
            }
            if self.cfg.scheme == Scheme::TokenExchange {
                // the token was just exposed on the channel
                let fresh = fresh_token(&mut self.rng);
                if let Protocol::Exchange(n) = &mut self.node_mut(r).protocol {
                    n.rotate(fresh);
                }
                self.charge(r, Category::Transceive, self.params.transceive_energy());
                self.emit(
                    now,
                    Actor::Node(r),
                    EventKind::TokenExchangeTx,
                    Some(fresh),
                    None,
                    Some(src),
                );
                self.schedule(
                    now + d,
                    Action::TokenShareArrival {
                        from: r,
                        to: src,
                        token: fresh,
                    },
                );
            }
        }
    }

    fn on_sleep(&mut self, now: u64, id: NodeId, generation: u64) -> Result<(), SimError> {
        let node = self.node(id);
        if node.generation != generation || node.mode() != Mode::Active {
            return Ok(());
        }
        self.accrue(id, now);
        let node = self.node_mut(id);
        node.session = None;
        match &mut node.protocol {
            Protocol::Otp(n) => n.complete_exchange()?,
            Protocol::Exchange(n) => n.complete_exchange()?,
            Protocol::Duty(n) => n.sleep()?,
        }
        self.charge(id, Category::ModeSwitch, self.params.switch_energy());
        self.emit_mode(now, id, Mode::Sleeping);
        Ok(())
    }
}

fn fresh_token(rng: &mut ChaCha8Rng) -> Token {
    Token::from_wire(Block64(rng.random()))
}

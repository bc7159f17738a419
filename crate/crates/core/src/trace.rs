//! Run records and their CSV form.
//!
//! The trace CSV has the header
//! `time_ms,seq,actor,event,token_hex,decision,dest,energy_total_nj` and one
//! row per event in `(time, seq)` order. `decision` holds the wake decision on
//! `WakeDecisionMade` rows and the new mode on `ModeChange` rows. On wake-up
//! rows `dest` is the addressed node; it is empty when the signal came from
//! the adversary, which does not know who a captured token was meant for.
//! `energy_total_nj` is the actor's cumulative ledger total after the event,
//! with exact picojoule precision, and is empty for adversary rows.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::cipher::{Block64, NodeId};
use crate::energy::{Energy, EnergyLedger};
use crate::node::Mode;
use crate::otp::{Token, WakeDecision};

pub const CSV_HEADER: [&str; 8] = [
    "time_ms",
    "seq",
    "actor",
    "event",
    "token_hex",
    "decision",
    "dest",
    "energy_total_nj",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EventKind {
    SensorFire,
    WakeSignalTx,
    WakeSignalRx,
    WakeDecisionMade,
    DataTx,
    DataRx,
    AckTx,
    AckRx,
    SlotBoundary,
    AdversaryReplay,
    ModeChange,
    /// Token distribution over the air; only the token-exchange scheme
    /// ever emits these.
    TokenExchangeTx,
    TokenExchangeRx,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::SensorFire,
        EventKind::WakeSignalTx,
        EventKind::WakeSignalRx,
        EventKind::WakeDecisionMade,
        EventKind::DataTx,
        EventKind::DataRx,
        EventKind::AckTx,
        EventKind::AckRx,
        EventKind::SlotBoundary,
        EventKind::AdversaryReplay,
        EventKind::ModeChange,
        EventKind::TokenExchangeTx,
        EventKind::TokenExchangeRx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SensorFire => "SensorFire",
            EventKind::WakeSignalTx => "WakeSignalTx",
            EventKind::WakeSignalRx => "WakeSignalRx",
            EventKind::WakeDecisionMade => "WakeDecisionMade",
            EventKind::DataTx => "DataTx",
            EventKind::DataRx => "DataRx",
            EventKind::AckTx => "AckTx",
            EventKind::AckRx => "AckRx",
            EventKind::SlotBoundary => "SlotBoundary",
            EventKind::AdversaryReplay => "AdversaryReplay",
            EventKind::ModeChange => "ModeChange",
            EventKind::TokenExchangeTx => "TokenExchangeTx",
            EventKind::TokenExchangeRx => "TokenExchangeRx",
        }
    }

    /// Transmissions on the shared channel.
    pub fn is_transmission(self) -> bool {
        matches!(
            self,
            EventKind::WakeSignalTx
                | EventKind::DataTx
                | EventKind::AckTx
                | EventKind::AdversaryReplay
                | EventKind::TokenExchangeTx
        )
    }
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Actor {
    Node(NodeId),
    Adversary,
}

impl Actor {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Actor::Node(id) => Some(id),
            Actor::Adversary => None,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Node(id) => write!(f, "node{id}"),
            Actor::Adversary => f.write_str("adversary"),
        }
    }
}

impl FromStr for Actor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "adversary" {
            return Ok(Actor::Adversary);
        }
        s.strip_prefix("node")
            .and_then(|n| n.parse::<u32>().ok())
            .map(|n| Actor::Node(NodeId(n)))
            .ok_or_else(|| format!("unknown actor {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Decision(WakeDecision),
    Mode(Mode),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Decision(d) => f.write_str(d.as_str()),
            Outcome::Mode(m) => f.write_str(m.as_str()),
        }
    }
}

impl FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        WakeDecision::parse(s)
            .map(Outcome::Decision)
            .or_else(|| Mode::parse(s).map(Outcome::Mode))
            .ok_or_else(|| format!("unknown decision {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time_ms: u64,
    pub seq: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub token: Option<Token>,
    pub outcome: Option<Outcome>,
    pub dest: Option<NodeId>,
    pub energy_total: Option<Energy>,
}

impl TraceEvent {
    pub fn decision(&self) -> Option<WakeDecision> {
        match self.outcome {
            Some(Outcome::Decision(d)) => Some(d),
            _ => None,
        }
    }

    pub fn mode(&self) -> Option<Mode> {
        match self.outcome {
            Some(Outcome::Mode(m)) => Some(m),
            _ => None,
        }
    }

    /// Wake-up rows without an addressee came from the adversary.
    pub fn from_adversary(&self) -> bool {
        matches!(
            self.kind,
            EventKind::WakeSignalRx | EventKind::WakeDecisionMade
        ) && self.dest.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counters {
    pub wakes_accepted: u64,
    pub wakes_rejected_consumed: u64,
    pub wakes_rejected_mismatch: u64,
    pub adversary_attempts: u64,
    pub adversary_successes: u64,
}

impl Counters {
    /// Recounts from event rows alone.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a TraceEvent>) -> Counters {
        let mut c = Counters::default();
        for e in events {
            match e.kind {
                EventKind::AdversaryReplay => c.adversary_attempts += 1,
                EventKind::WakeDecisionMade => match e.decision() {
                    Some(WakeDecision::Accept) => {
                        c.wakes_accepted += 1;
                        if e.from_adversary() {
                            c.adversary_successes += 1;
                        }
                    }
                    Some(WakeDecision::RejectConsumed) => c.wakes_rejected_consumed += 1,
                    Some(WakeDecision::RejectMismatch) => c.wakes_rejected_mismatch += 1,
                    None => {}
                },
                _ => {}
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub ledger: EnergyLedger,
    pub counters: Counters,
    /// Simulated time window.
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Trace {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        write_events_csv(&self.events, out)
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        // writing into a Vec only fails on formatting bugs
        self.write_csv(&mut buf).expect("in-memory CSV write");
        buf
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn write_events_csv<W: Write>(events: &[TraceEvent], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for e in events {
        w.write_record([
            e.time_ms.to_string(),
            e.seq.to_string(),
            e.actor.to_string(),
            e.kind.to_string(),
            opt(&e.token),
            opt(&e.outcome),
            opt(&e.dest),
            e.energy_total
                .map(Energy::nano_joules_string)
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceReadError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

fn parse_energy_nj(s: &str) -> Result<Energy, String> {
    let (whole, frac) = s
        .split_once('.')
        .ok_or_else(|| format!("energy {s:?} lacks three decimals"))?;
    if frac.len() != 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("energy {s:?} lacks three decimals"));
    }
    let whole: u64 = whole.parse().map_err(|e| format!("energy {s:?}: {e}"))?;
    let frac: u64 = frac.parse().map_err(|e| format!("energy {s:?}: {e}"))?;
    whole
        .checked_mul(1_000)
        .and_then(|w| w.checked_add(frac))
        .map(Energy::from_pico_joules)
        .ok_or_else(|| format!("energy {s:?} overflows"))
}

fn parse_row(rec: &csv::StringRecord) -> Result<TraceEvent, String> {
    if rec.len() != CSV_HEADER.len() {
        return Err(format!(
            "expected {} fields, got {}",
            CSV_HEADER.len(),
            rec.len()
        ));
    }
    let field = |i: usize| rec.get(i).unwrap_or("");
    let nonempty = |i: usize| Some(field(i)).filter(|s| !s.is_empty());
    Ok(TraceEvent {
        time_ms: field(0).parse().map_err(|e| format!("time_ms: {e}"))?,
        seq: field(1).parse().map_err(|e| format!("seq: {e}"))?,
        actor: field(2).parse()?,
        kind: field(3).parse()?,
        token: nonempty(4)
            .map(|s| Block64::from_hex(s).map(Token::from_wire))
            .transpose()
            .map_err(|e| format!("token_hex: {e}"))?,
        outcome: nonempty(5).map(str::parse).transpose()?,
        dest: nonempty(6)
            .map(|s| s.parse::<u32>().map(NodeId))
            .transpose()
            .map_err(|e| format!("dest: {e}"))?,
        energy_total: nonempty(7).map(parse_energy_nj).transpose()?,
    })
}

/// Reads a trace CSV back into events, checking the header and that rows are
/// in `(time, seq)` order.
pub fn read_events_csv<R: Read>(input: R) -> Result<Vec<TraceEvent>, TraceReadError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(TraceReadError::Header {
                expected: CSV_HEADER.join(","),
                found: String::new(),
            })
        }
    };
    if header.iter().ne(CSV_HEADER) {
        return Err(TraceReadError::Header {
            expected: CSV_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut events: Vec<TraceEvent> = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let ev = parse_row(&rec?).map_err(|message| TraceReadError::Row { row, message })?;
        if let Some(prev) = events.last() {
            if (ev.time_ms, ev.seq) <= (prev.time_ms, prev.seq) {
                return Err(TraceReadError::Row {
                    row,
                    message: "rows are not in (time, seq) order".into(),
                });
            }
        }
        events.push(ev);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<TraceEvent> {
        vec![
            TraceEvent {
                time_ms: 0,
                seq: 0,
                actor: Actor::Node(NodeId(1)),
                kind: EventKind::ModeChange,
                token: None,
                outcome: Some(Outcome::Mode(Mode::Sleeping)),
                dest: None,
                energy_total: Some(Energy::ZERO),
            },
            TraceEvent {
                time_ms: 7,
                seq: 1,
                actor: Actor::Adversary,
                kind: EventKind::AdversaryReplay,
                token: Some(Token::from_wire(Block64(0x41ea_3a0a_94ba_a940))),
                outcome: None,
                dest: None,
                energy_total: None,
            },
            TraceEvent {
                time_ms: 8,
                seq: 2,
                actor: Actor::Node(NodeId(1)),
                kind: EventKind::WakeDecisionMade,
                token: Some(Token::from_wire(Block64(0x41ea_3a0a_94ba_a940))),
                outcome: Some(Outcome::Decision(WakeDecision::RejectConsumed)),
                dest: None,
                energy_total: Some(Energy::from_pico_joules(28_805)),
            },
        ]
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        write_events_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time_ms,seq,actor,event,token_hex,decision,dest,energy_total_nj\n"
        );
    }

    #[test]
    fn rows_render_and_read_back() {
        let mut buf = Vec::new();
        write_events_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().nth(3).unwrap(),
            "8,2,node1,WakeDecisionMade,41ea3a0a94baa940,RejectConsumed,,28.805"
        );
        assert!(!text.contains('\r'));
        assert_eq!(read_events_csv(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn counters_from_rows() {
        let c = Counters::from_events(&sample());
        assert_eq!(c.adversary_attempts, 1);
        assert_eq!(c.wakes_rejected_consumed, 1);
        assert_eq!(c.adversary_successes, 0);
    }

    #[test]
    fn reader_rejects_bad_input() {
        assert!(matches!(
            read_events_csv(&b"a,b\n"[..]),
            Err(TraceReadError::Header { .. })
        ));
        assert!(read_events_csv(&b""[..]).is_err());
        let out_of_order = "time_ms,seq,actor,event,token_hex,decision,dest,energy_total_nj\n\
                            5,1,node0,SensorFire,,,1,0.000\n\
                            5,0,node0,SensorFire,,,1,0.000\n";
        assert!(matches!(
            read_events_csv(out_of_order.as_bytes()),
            Err(TraceReadError::Row { row: 2, .. })
        ));
        let bad_energy = "time_ms,seq,actor,event,token_hex,decision,dest,energy_total_nj\n\
                          5,1,node0,SensorFire,,,1,0.5\n";
        assert!(read_events_csv(bad_energy.as_bytes()).is_err());
    }
}

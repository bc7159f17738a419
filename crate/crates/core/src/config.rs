//! Scenario configuration: a flat `key = value` text format with section
//! headers.
//!
//! ```text
//! scenario = replay-attack
//! slot_duration_ms = 1000
//!
//! [energy]
//! p_compute_uw = 7.37
//!
//! [adversary]
//! enabled = true
//!
//! [node 1]
//! neighbors = 0, 2
//!
//! [traffic]
//! send = 1000 0 1          # at_ms src dest
//! flow = 0 1 4000          # src dest mean_interval_ms
//! ```
//!
//! `#` starts a comment. Every unit is spelled out in the key name. Keys not
//! given take the defaults of [`ScenarioConfig::default`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::cipher::{derive_node_key, Key128, NodeId};
use crate::energy::EnergyParams;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{}", join_lines(.0))]
    Parse(Vec<LineError>),
    #[error("{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

fn join_lines(errs: &[LineError]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Time-slot one-time-password tokens computed on both ends.
    Otp,
    /// Tokens distributed over the air and rotated after exposure.
    TokenExchange,
    /// Synchronous wakeups every period, no wake-up receiver.
    DutyCycle,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Otp => "otp",
            Scheme::TokenExchange => "token-exchange",
            Scheme::DutyCycle => "duty-cycle",
        }
    }

    pub fn has_wake_receiver(self) -> bool {
        !matches!(self, Scheme::DutyCycle)
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "otp" => Ok(Scheme::Otp),
            "token-exchange" => Ok(Scheme::TokenExchange),
            "duty-cycle" => Ok(Scheme::DutyCycle),
            _ => Err(format!(
                "unknown scheme {s:?} (expected otp, token-exchange or duty-cycle)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryConfig {
    pub enabled: bool,
    /// Delay between hearing a token and re-broadcasting it.
    pub replay_latency_ms: u64,
    /// How many times each captured token is re-broadcast.
    pub replay_repeats: u32,
    pub replay_interval_ms: u64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            enabled: false,
            replay_latency_ms: 5,
            replay_repeats: 1,
            replay_interval_ms: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub neighbors: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduledSend {
    pub at_ms: u64,
    pub src: NodeId,
    pub dest: NodeId,
}

/// Sensor readings at `src` with exponential inter-arrival times, each sent
/// to `dest`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomFlow {
    pub src: NodeId,
    pub dest: NodeId,
    pub mean_interval_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub scheme: Scheme,
    pub duration_ms: u64,
    pub seed: u64,
    #[serde(serialize_with = "serialize_key")]
    pub master_key: Key128,
    pub slot_duration_ms: u64,
    pub slot_epoch_ms: u64,
    pub propagation_delay_ms: u64,
    pub acks: bool,
    pub payload_bytes: u32,
    pub battery_capacity_mah: f64,
    pub self_discharge_pct_per_year: f64,
    pub duty_cycle_period_ms: u64,
    pub energy: EnergyParams,
    pub adversary: AdversaryConfig,
    pub nodes: Vec<NodeSpec>,
    pub sends: Vec<ScheduledSend>,
    pub flows: Vec<RandomFlow>,
}

fn serialize_key<S: serde::Serializer>(k: &Key128, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&k.to_hex())
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: String::new(),
            scheme: Scheme::Otp,
            duration_ms: 60_000,
            seed: 0,
            master_key: Key128::from_u128(0x0001_0203_0405_0607_0809_0a0b_0c0d_0e0f),
            slot_duration_ms: 1_000,
            slot_epoch_ms: 0,
            propagation_delay_ms: 1,
            acks: false,
            payload_bytes: 32,
            battery_capacity_mah: 2_000.0,
            self_discharge_pct_per_year: 2.0,
            duty_cycle_period_ms: 1_000,
            energy: EnergyParams::default(),
            adversary: AdversaryConfig::default(),
            nodes: Vec::new(),
            sends: Vec::new(),
            flows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Section {
    Top,
    Energy,
    Adversary,
    Traffic,
    Node(NodeId),
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Section::Top => f.write_str("top level"),
            Section::Energy => f.write_str("[energy]"),
            Section::Adversary => f.write_str("[adversary]"),
            Section::Traffic => f.write_str("[traffic]"),
            Section::Node(id) => write!(f, "[node {id}]"),
        }
    }
}

fn parse_section(header: &str) -> Result<Section, String> {
    let mut words = header.split_whitespace();
    match (words.next(), words.next(), words.next()) {
        (Some("energy"), None, _) => Ok(Section::Energy),
        (Some("adversary"), None, _) => Ok(Section::Adversary),
        (Some("traffic"), None, _) => Ok(Section::Traffic),
        (Some("node"), Some(id), None) => parse_num::<u32>(id).map(|v| Section::Node(NodeId(v))),
        _ => Err(format!("unknown section [{header}]")),
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("{s:?}: {e}"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("{s:?} is not a boolean")),
    }
}

fn parse_id_list(s: &str) -> Result<Vec<NodeId>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(|w| parse_num::<u32>(w).map(NodeId))
        .collect()
}

fn fields<const N: usize>(s: &str) -> Result<[&str; N], String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| format!("expected {N} fields, got {}", p.len()))
}

impl ScenarioConfig {
    /// Parses configuration text. Defaults fill every key not given; the
    /// result is not yet validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut errors = Vec::new();
        let mut section = Section::Top;
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut node_sections: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut node_order: Vec<NodeId> = Vec::new();
        let mut have_name = false;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fail = |message: String| {
                errors.push(LineError {
                    line: line_no,
                    message,
                })
            };

            if let Some(rest) = line.strip_prefix('[') {
                let Some(header) = rest.strip_suffix(']') else {
                    fail(format!("unterminated section header {line:?}"));
                    continue;
                };
                match parse_section(header.trim()) {
                    Ok(Section::Node(id)) => {
                        if node_sections.insert(id, Vec::new()).is_some() {
                            fail(format!("node {id} declared twice"));
                        } else {
                            node_order.push(id);
                        }
                        section = Section::Node(id);
                    }
                    Ok(s) => {
                        if matches!(s, Section::Energy | Section::Adversary | Section::Traffic)
                            && !seen.insert((s.to_string(), String::new()))
                        {
                            fail(format!("section {s} appears twice"));
                        }
                        section = s;
                    }
                    Err(e) => fail(e),
                }
                continue;
            }

            let Some((key, value)) = line.split_once('=') else {
                fail(format!("expected `key = value`, got {line:?}"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let repeatable = section == Section::Traffic && (key == "send" || key == "flow");
            if !repeatable && !seen.insert((section.to_string(), key.to_string())) {
                fail(format!("duplicate key {key} in {section}"));
                continue;
            }

            let result = match &section {
                Section::Top => cfg.set_top(key, value).map(|named| have_name |= named),
                Section::Energy => cfg.set_energy(key, value),
                Section::Adversary => cfg.set_adversary(key, value),
                Section::Traffic => cfg.set_traffic(key, value),
                Section::Node(id) => match key {
                    "neighbors" => parse_id_list(value).map(|v| {
                        node_sections.insert(*id, v);
                    }),
                    _ => Err(format!("unknown key {key} in {section}")),
                },
            };
            if let Err(e) = result {
                fail(format!("{key}: {e}"));
            }
        }

        if !have_name {
            errors.push(LineError {
                line: 0,
                message: "missing required key `scenario`".into(),
            });
        }
        if !errors.is_empty() {
            return Err(ConfigError::Parse(errors));
        }
        cfg.nodes = node_order
            .into_iter()
            .map(|id| NodeSpec {
                id,
                neighbors: node_sections.remove(&id).unwrap_or_default(),
            })
            .collect();
        Ok(cfg)
    }

    /// Parses and validates.
    pub fn load(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set_top(&mut self, key: &str, v: &str) -> Result<bool, String> {
        match key {
            "scenario" => {
                if v.is_empty() || v.contains(|c: char| c.is_whitespace() || c == ',') {
                    return Err("scenario name must be non-empty without spaces or commas".into());
                }
                self.scenario = v.to_string();
                return Ok(true);
            }
            "scheme" => self.scheme = v.parse()?,
            "duration_ms" => self.duration_ms = parse_num(v)?,
            "seed" => self.seed = parse_num(v)?,
            "master_key" => self.master_key = Key128::from_hex(v).map_err(|e| e.to_string())?,
            "slot_duration_ms" => self.slot_duration_ms = parse_num(v)?,
            "slot_epoch_ms" => self.slot_epoch_ms = parse_num(v)?,
            "propagation_delay_ms" => self.propagation_delay_ms = parse_num(v)?,
            "acks" => self.acks = parse_bool(v)?,
            "payload_bytes" => self.payload_bytes = parse_num(v)?,
            "battery_capacity_mah" => self.battery_capacity_mah = parse_num(v)?,
            "self_discharge_pct_per_year" => self.self_discharge_pct_per_year = parse_num(v)?,
            "duty_cycle_period_ms" => self.duty_cycle_period_ms = parse_num(v)?,
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(false)
    }

    fn set_energy(&mut self, key: &str, v: &str) -> Result<(), String> {
        let e = &mut self.energy;
        match key {
            "p_switch_uj" => e.p_switch_uj = parse_num(v)?,
            "t_active_ms" => e.t_active_ms = parse_num(v)?,
            "p_active_uw" => e.p_active_uw = parse_num(v)?,
            "p_transceive_uj" => e.p_transceive_uj = parse_num(v)?,
            "p_byte_uj" => e.p_byte_uj = parse_num(v)?,
            "p_wake_uj" => e.p_wake_uj = parse_num(v)?,
            "p_compute_uw" => e.p_compute_uw = parse_num(v)?,
            "compute_duration_ms" => e.compute_duration_ms = parse_num(v)?,
            "wur_listen_current_ua" => e.wur_listen_current_ua = parse_num(v)?,
            "mcu_sleep_current_na" => e.mcu_sleep_current_na = parse_num(v)?,
            "supply_voltage_v" => e.supply_voltage_v = parse_num(v)?,
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    fn set_adversary(&mut self, key: &str, v: &str) -> Result<(), String> {
        let a = &mut self.adversary;
        match key {
            "enabled" => a.enabled = parse_bool(v)?,
            "replay_latency_ms" => a.replay_latency_ms = parse_num(v)?,
            "replay_repeats" => a.replay_repeats = parse_num(v)?,
            "replay_interval_ms" => a.replay_interval_ms = parse_num(v)?,
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    fn set_traffic(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "send" => {
                let [at, src, dest] = fields::<3>(v)?;
                self.sends.push(ScheduledSend {
                    at_ms: parse_num(at)?,
                    src: NodeId(parse_num(src)?),
                    dest: NodeId(parse_num(dest)?),
                });
            }
            "flow" => {
                let [src, dest, mean] = fields::<3>(v)?;
                self.flows.push(RandomFlow {
                    src: NodeId(parse_num(src)?),
                    dest: NodeId(parse_num(dest)?),
                    mean_interval_ms: parse_num(mean)?,
                });
            }
            _ => return Err(format!("unknown key {key}")),
        }
        Ok(())
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bad = |m: String| out.push(m);

        if self.scenario.is_empty() {
            bad("scenario name is empty".into());
        }
        if self.duration_ms == 0 {
            bad("duration_ms must be positive".into());
        }
        if self.slot_epoch_ms.checked_add(self.duration_ms).is_none() {
            bad("slot_epoch_ms + duration_ms overflows".into());
        }
        if self.slot_duration_ms == 0 {
            bad("slot_duration_ms must be at least 1".into());
        }
        if self.propagation_delay_ms >= self.slot_duration_ms {
            bad(format!(
                "timing collaboration: propagation_delay_ms ({}) must be shorter than slot_duration_ms ({}) so a token arrives in the slot it was computed for",
                self.propagation_delay_ms, self.slot_duration_ms
            ));
        }
        let dwell = self.energy.t_active_ms;
        if dwell <= self.propagation_delay_ms.saturating_mul(3) {
            bad(format!(
                "timing collaboration: t_active_ms ({dwell}) must exceed three propagation delays ({} ms) so the data exchange completes while both radios are awake",
                self.propagation_delay_ms.saturating_mul(3)
            ));
        }
        for p in self.energy.problems() {
            bad(p);
        }
        if !self.battery_capacity_mah.is_finite() || self.battery_capacity_mah <= 0.0 {
            bad(format!(
                "battery_capacity_mah must be positive, got {}",
                self.battery_capacity_mah
            ));
        }
        if !self.self_discharge_pct_per_year.is_finite() || self.self_discharge_pct_per_year < 0.0 {
            bad(format!(
                "self_discharge_pct_per_year must be non-negative, got {}",
                self.self_discharge_pct_per_year
            ));
        }
        if self.scheme == Scheme::DutyCycle {
            if self.duty_cycle_period_ms <= dwell {
                bad(format!(
                    "duty_cycle_period_ms ({}) must exceed t_active_ms ({dwell})",
                    self.duty_cycle_period_ms
                ));
            }
            if self.adversary.enabled {
                bad("the adversary replays wake-up tokens; the duty-cycle scheme has no wake-up receiver".into());
            }
        }
        if self.adversary.enabled {
            if self.adversary.replay_repeats == 0 {
                bad("replay_repeats must be at least 1".into());
            }
            if self.adversary.replay_repeats > 1 && self.adversary.replay_interval_ms == 0 {
                bad("replay_interval_ms must be positive when replay_repeats > 1".into());
            }
        }

        if self.nodes.is_empty() {
            bad("at least one [node N] section is required".into());
        }
        let ids: BTreeSet<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for n in &self.nodes {
            let mut set = BTreeSet::new();
            for &m in &n.neighbors {
                if m == n.id {
                    bad(format!("node {} lists itself as a neighbor", n.id));
                } else if !ids.contains(&m) {
                    bad(format!("node {} lists unknown neighbor {m}", n.id));
                } else if !set.insert(m) {
                    bad(format!("node {} lists neighbor {m} more than once", n.id));
                }
            }
            adjacency.insert(n.id, set);
        }
        for (a, ns) in &adjacency {
            for b in ns {
                if adjacency.get(b).is_some_and(|back| !back.contains(a)) {
                    bad(format!(
                        "radio range must be symmetric: node {a} lists {b} but {b} does not list {a}"
                    ));
                }
            }
        }
        let mut keys = BTreeMap::new();
        for &id in &ids {
            if let Some(other) = keys.insert(derive_node_key(self.master_key, id), id) {
                bad(format!("derived keys of nodes {other} and {id} collide"));
            }
        }

        let end = self.slot_epoch_ms.saturating_add(self.duration_ms);
        let route_ok = |src: NodeId, dest: NodeId, what: &str, out: &mut Vec<String>| {
            if !ids.contains(&src) {
                out.push(format!("{what}: unknown source node {src}"));
            } else if !ids.contains(&dest) {
                out.push(format!("{what}: unknown destination node {dest}"));
            } else if !adjacency[&src].contains(&dest) {
                out.push(format!("{what}: node {dest} is not a neighbor of {src}"));
            }
        };
        for s in &self.sends {
            let what = format!("send at {} ms", s.at_ms);
            route_ok(s.src, s.dest, &what, &mut out);
            if s.at_ms < self.slot_epoch_ms || s.at_ms >= end {
                out.push(format!(
                    "{what}: outside the simulated window [{}, {end})",
                    self.slot_epoch_ms
                ));
            }
        }
        for f in &self.flows {
            let what = format!("flow {} -> {}", f.src, f.dest);
            route_ok(f.src, f.dest, &what, &mut out);
            if !f.mean_interval_ms.is_finite() || f.mean_interval_ms <= 0.0 {
                out.push(format!(
                    "{what}: mean_interval_ms must be positive, got {}",
                    f.mean_interval_ms
                ));
            }
        }
        out
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    /// Renders the fully resolved configuration in the input format.
    /// Parsing the output yields an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let e = &self.energy;
        let a = &self.adversary;
        // writes to a String cannot fail
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "scheme = {}", self.scheme.as_str());
        let _ = writeln!(s, "duration_ms = {}", self.duration_ms);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "master_key = {}", self.master_key.to_hex());
        let _ = writeln!(s, "slot_duration_ms = {}", self.slot_duration_ms);
        let _ = writeln!(s, "slot_epoch_ms = {}", self.slot_epoch_ms);
        let _ = writeln!(s, "propagation_delay_ms = {}", self.propagation_delay_ms);
        let _ = writeln!(s, "acks = {}", self.acks);
        let _ = writeln!(s, "payload_bytes = {}", self.payload_bytes);
        let _ = writeln!(s, "battery_capacity_mah = {:?}", self.battery_capacity_mah);
        let _ = writeln!(
            s,
            "self_discharge_pct_per_year = {:?}",
            self.self_discharge_pct_per_year
        );
        let _ = writeln!(s, "duty_cycle_period_ms = {}", self.duty_cycle_period_ms);
        let _ = writeln!(s, "\n[energy]");
        let _ = writeln!(s, "p_switch_uj = {:?}", e.p_switch_uj);
        let _ = writeln!(s, "t_active_ms = {}", e.t_active_ms);
        let _ = writeln!(s, "p_active_uw = {:?}", e.p_active_uw);
        let _ = writeln!(s, "p_transceive_uj = {:?}", e.p_transceive_uj);
        let _ = writeln!(s, "p_byte_uj = {:?}", e.p_byte_uj);
        let _ = writeln!(s, "p_wake_uj = {:?}", e.p_wake_uj);
        let _ = writeln!(s, "p_compute_uw = {:?}", e.p_compute_uw);
        let _ = writeln!(s, "compute_duration_ms = {:?}", e.compute_duration_ms);
        let _ = writeln!(s, "wur_listen_current_ua = {:?}", e.wur_listen_current_ua);
        let _ = writeln!(s, "mcu_sleep_current_na = {:?}", e.mcu_sleep_current_na);
        let _ = writeln!(s, "supply_voltage_v = {:?}", e.supply_voltage_v);
        let _ = writeln!(s, "\n[adversary]");
        let _ = writeln!(s, "enabled = {}", a.enabled);
        let _ = writeln!(s, "replay_latency_ms = {}", a.replay_latency_ms);
        let _ = writeln!(s, "replay_repeats = {}", a.replay_repeats);
        let _ = writeln!(s, "replay_interval_ms = {}", a.replay_interval_ms);
        for n in &self.nodes {
            let list: Vec<String> = n.neighbors.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "\n[node {}]\nneighbors = {}", n.id, list.join(", "));
        }
        if !self.sends.is_empty() || !self.flows.is_empty() {
            let _ = writeln!(s, "\n[traffic]");
            for t in &self.sends {
                let _ = writeln!(s, "send = {} {} {}", t.at_ms, t.src, t.dest);
            }
            for f in &self.flows {
                let _ = writeln!(s, "flow = {} {} {:?}", f.src, f.dest, f.mean_interval_ms);
            }
        }
        s
    }
}

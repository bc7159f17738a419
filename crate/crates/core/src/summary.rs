//! Per-run summary: energy per node and category, decision counters,
//! lifetime projections and built-in checks.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cipher::NodeId;
use crate::config::{ScenarioConfig, Scheme};
use crate::energy::{
    consumption_mah, listen_lifetime, self_discharge_power_uw, Category, Energy, HOURS_PER_YEAR,
};
use crate::trace::{Counters, Trace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyFigure {
    pub pj: u64,
    /// Microjoules, three decimals.
    pub uj: String,
}

impl From<Energy> for EnergyFigure {
    fn from(e: Energy) -> Self {
        EnergyFigure {
            pj: e.pico_joules(),
            uj: e.micro_joules_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub id: NodeId,
    pub total: EnergyFigure,
    pub categories: BTreeMap<&'static str, EnergyFigure>,
    pub average_power_uw: f64,
    pub projected_lifetime_years: f64,
    pub below_self_discharge: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Failed enforced checks make the run fail.
    pub enforced: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub duration_ms: u64,
    pub counters: Counters,
    pub nodes: Vec<NodeSummary>,
    pub listen_lifetime_hours: Option<f64>,
    pub listen_lifetime_years: Option<f64>,
    pub ten_year_listen_mah: f64,
    pub self_discharge_threshold_uw: f64,
    pub checks: Vec<Check>,
    pub config: ScenarioConfig,
}

impl RunSummary {
    pub fn new(cfg: &ScenarioConfig, trace: &Trace) -> Self {
        let duration = trace.duration_ms();
        let volts = cfg.energy.supply_voltage_v;
        let threshold = self_discharge_power_uw(
            cfg.battery_capacity_mah,
            cfg.self_discharge_pct_per_year,
            volts,
        );
        let battery_joules = cfg.battery_capacity_mah / 1_000.0 * 3_600.0 * volts;

        let nodes: Vec<NodeSummary> = trace
            .ledger
            .iter()
            .map(|(id, e)| {
                let avg = e.total().average_power_uw(duration);
                let years = if avg > 0.0 {
                    battery_joules / (avg * 1e-6) / 3_600.0 / HOURS_PER_YEAR
                } else {
                    f64::INFINITY
                };
                NodeSummary {
                    id,
                    total: e.total().into(),
                    categories: Category::ALL
                        .iter()
                        .map(|c| (c.as_str(), e.get(*c).into()))
                        .collect(),
                    average_power_uw: avg,
                    projected_lifetime_years: years,
                    below_self_discharge: avg < threshold,
                }
            })
            .collect();

        let mut checks = Vec::new();
        let recount = Counters::from_events(&trace.events);
        checks.push(Check {
            name: "counters_match_trace".into(),
            passed: recount == trace.counters,
            enforced: true,
            detail: format!("engine {:?}, recount {:?}", trace.counters, recount),
        });
        checks.push(Check {
            name: "ledger_reconciles".into(),
            passed: trace.ledger.reconciles(),
            enforced: true,
            detail: "every node total equals the sum of its categories".into(),
        });
        if cfg.scheme == Scheme::Otp && cfg.adversary.enabled {
            checks.push(Check {
                name: "adversary_successes_zero".into(),
                passed: trace.counters.adversary_successes == 0,
                enforced: true,
                detail: format!(
                    "{} of {} replays woke a node",
                    trace.counters.adversary_successes, trace.counters.adversary_attempts
                ),
            });
        }
        for n in &nodes {
            checks.push(Check {
                name: format!("node{}_below_self_discharge", n.id),
                passed: n.below_self_discharge,
                enforced: false,
                detail: format!(
                    "average {:.4} uW against {:.4} uW self-discharge",
                    n.average_power_uw, threshold
                ),
            });
        }

        let listen_hours = if cfg.scheme.has_wake_receiver() {
            listen_lifetime(cfg.energy.wur_listen_current_ua, cfg.battery_capacity_mah).ok()
        } else {
            None
        };

        RunSummary {
            scenario: cfg.scenario.clone(),
            scheme: cfg.scheme,
            seed: cfg.seed,
            duration_ms: duration,
            counters: trace.counters,
            nodes,
            listen_lifetime_hours: listen_hours,
            listen_lifetime_years: listen_hours.map(|h| h / HOURS_PER_YEAR),
            ten_year_listen_mah: consumption_mah(
                cfg.energy.wur_listen_current_ua,
                10.0 * HOURS_PER_YEAR,
            ),
            self_discharge_threshold_uw: threshold,
            checks,
            config: cfg.clone(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.enforced)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.enforced && !c.passed)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSummary> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn to_json(&self) -> String {
        // f64::INFINITY serializes as null, everything else is plain data
        serde_json::to_string_pretty(self).expect("summary is serializable") + "\n"
    }
}

//! Energy model: scheduled-wakeup cost, slot amortization, battery math and
//! per-node ledgers.
//!
//! All accounting is integer picojoules. Powers are integer nanowatts so that
//! `power * ms` lands exactly on picojoules (1 nW * 1 ms = 1 pJ). Floating
//! point configuration values are rounded once, when converted.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::NodeId;
use crate::otp::SlotConfig;

pub const HOURS_PER_YEAR: f64 = 365.25 * 24.0;
const SECONDS_PER_YEAR: f64 = HOURS_PER_YEAR * 3600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("energy amounts must be finite and non-negative, got {0} uJ")]
    InvalidAmount(f64),
    #[error("current must be positive, got {0} uA")]
    NonPositiveCurrent(f64),
}

/// An amount of energy, in picojoules.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Energy(u64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub const fn from_pico_joules(pj: u64) -> Self {
        Energy(pj)
    }

    pub fn from_nano_joules(nj: u64) -> Self {
        Energy(nj * 1_000)
    }

    pub fn from_micro_joules(uj: f64) -> Result<Self, EnergyError> {
        if !uj.is_finite() || uj < 0.0 {
            return Err(EnergyError::InvalidAmount(uj));
        }
        Ok(Energy((uj * 1e6).round() as u64))
    }

    pub const fn pico_joules(self) -> u64 {
        self.0
    }

    pub fn micro_joules(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Nanojoules with three decimals, exact.
    pub fn nano_joules_string(self) -> String {
        format!("{}.{:03}", self.0 / 1_000, self.0 % 1_000)
    }

    /// Microjoules with three decimals (rounded to the nearest nanojoule).
    pub fn micro_joules_string(self) -> String {
        format!("{:.3}", self.micro_joules())
    }

    /// Average power over `duration_ms`, in microwatts.
    pub fn average_power_uw(self, duration_ms: u64) -> f64 {
        if duration_ms == 0 {
            return 0.0;
        }
        // pJ / ms = nW
        self.0 as f64 / duration_ms as f64 / 1_000.0
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Mul<u64> for Energy {
    type Output = Energy;
    fn mul(self, rhs: u64) -> Energy {
        Energy(self.0 * rhs)
    }
}

impl std::iter::Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, Add::add)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} uJ", self.micro_joules_string())
    }
}

/// Instantaneous power, in nanowatts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Power(u64);

impl Power {
    pub const ZERO: Power = Power(0);

    pub const fn from_nano_watts(nw: u64) -> Self {
        Power(nw)
    }

    pub fn from_micro_watts(uw: f64) -> Self {
        Power((uw * 1_000.0).round() as u64)
    }

    pub const fn nano_watts(self) -> u64 {
        self.0
    }

    pub fn micro_watts(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn over(self, duration_ms: u64) -> Energy {
        Energy(self.0 * duration_ms)
    }
}

impl Add for Power {
    type Output = Power;
    fn add(self, rhs: Power) -> Power {
        Power(self.0 + rhs.0)
    }
}

/// Every power and energy figure the node model uses.
///
/// `p_switch_uj` and `p_transceive_uj` are per-event energies; `p_active_uw`
/// is a power that is integrated over `t_active_ms`. The scheduled-wakeup
/// formula is only dimensionally consistent read this way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Energy of one sleep/active transition.
    pub p_switch_uj: f64,
    /// Active dwell per wakeup.
    pub t_active_ms: u64,
    pub p_active_uw: f64,
    /// Energy of one transmit or receive event on the main radio.
    pub p_transceive_uj: f64,
    /// Extra energy per payload byte on data frames.
    pub p_byte_uj: f64,
    /// MCU wake cost for a token refresh.
    pub p_wake_uj: f64,
    /// MCU power while computing one token.
    pub p_compute_uw: f64,
    pub compute_duration_ms: f64,
    pub wur_listen_current_ua: f64,
    pub mcu_sleep_current_na: f64,
    pub supply_voltage_v: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            p_switch_uj: 5.0,
            t_active_ms: 10,
            p_active_uw: 24_000.0,
            p_transceive_uj: 50.0,
            p_byte_uj: 0.0,
            p_wake_uj: 0.0,
            p_compute_uw: 7.37,
            compute_duration_ms: 1.0,
            wur_listen_current_ua: 1.2,
            mcu_sleep_current_na: 650.0,
            supply_voltage_v: 3.0,
        }
    }
}

impl EnergyParams {
    /// Lists every violated constraint.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("p_switch_uj", self.p_switch_uj),
            ("p_active_uw", self.p_active_uw),
            ("p_transceive_uj", self.p_transceive_uj),
            ("p_byte_uj", self.p_byte_uj),
            ("p_wake_uj", self.p_wake_uj),
            ("p_compute_uw", self.p_compute_uw),
            ("compute_duration_ms", self.compute_duration_ms),
            ("wur_listen_current_ua", self.wur_listen_current_ua),
            ("mcu_sleep_current_na", self.mcu_sleep_current_na),
            ("supply_voltage_v", self.supply_voltage_v),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                out.push(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.compute_duration_ms.is_nan() || self.compute_duration_ms <= 0.0 {
            out.push(format!(
                "compute_duration_ms must be positive, got {}",
                self.compute_duration_ms
            ));
        }
        out
    }

    fn uj(v: f64) -> Energy {
        Energy((v * 1e6).round() as u64)
    }

    pub fn switch_energy(&self) -> Energy {
        Self::uj(self.p_switch_uj)
    }

    pub fn transceive_energy(&self) -> Energy {
        Self::uj(self.p_transceive_uj)
    }

    /// Main-radio energy of a data frame carrying `bytes` of payload.
    pub fn frame_energy(&self, bytes: u32) -> Energy {
        self.transceive_energy() + Self::uj(self.p_byte_uj) * u64::from(bytes)
    }

    pub fn wake_energy(&self) -> Energy {
        Self::uj(self.p_wake_uj)
    }

    /// One token encryption: compute power over compute duration.
    pub fn compute_energy(&self) -> Energy {
        // uW * ms = nJ
        Energy((self.p_compute_uw * self.compute_duration_ms * 1_000.0).round() as u64)
    }

    pub fn active_power(&self) -> Power {
        Power::from_micro_watts(self.p_active_uw)
    }

    pub fn active_dwell_energy(&self) -> Energy {
        self.active_power().over(self.t_active_ms)
    }

    /// Wake-up receiver listen power, current times supply voltage.
    pub fn listen_power(&self) -> Power {
        Power((self.wur_listen_current_ua * self.supply_voltage_v * 1_000.0).round() as u64)
    }

    pub fn sleep_power(&self) -> Power {
        Power((self.mcu_sleep_current_na * self.supply_voltage_v).round() as u64)
    }
}

/// Energy of one scheduled wakeup on a duty-cycled node:
/// `2 * switch + t_active * P_active + transceive`.
pub fn scheduled_wakeup_energy(p: &EnergyParams) -> Energy {
    p.switch_energy() * 2 + p.active_dwell_energy() + p.transceive_energy()
}

/// Cost of keeping the wake-up token fresh over `horizon_ms`: one MCU wake
/// plus one token computation per whole slot. Longer slots amortize better.
pub fn slot_maintenance_energy(p: &EnergyParams, cfg: &SlotConfig, horizon_ms: u64) -> Energy {
    let slots = horizon_ms / cfg.slot_duration_ms();
    (p.wake_energy() + p.compute_energy()) * slots
}

/// Hours a constant `current_ua` load runs from `capacity_mah`.
pub fn listen_lifetime(current_ua: f64, capacity_mah: f64) -> Result<f64, EnergyError> {
    if !current_ua.is_finite() || current_ua <= 0.0 {
        return Err(EnergyError::NonPositiveCurrent(current_ua));
    }
    Ok(capacity_mah * 1_000.0 / current_ua)
}

/// Charge drawn by a constant `current_ua` load over `hours`, in mAh.
pub fn consumption_mah(current_ua: f64, hours: f64) -> f64 {
    current_ua * hours / 1_000.0
}

/// Average power, in microwatts, matching a battery that self-discharges
/// `pct_per_year` percent of `capacity_mah` per year at `voltage_v`.
pub fn self_discharge_power_uw(capacity_mah: f64, pct_per_year: f64, voltage_v: f64) -> f64 {
    let joules_per_year = capacity_mah / 1_000.0 * 3_600.0 * voltage_v * pct_per_year / 100.0;
    joules_per_year / SECONDS_PER_YEAR * 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    WurListen,
    McuSleep,
    ModeSwitch,
    ActiveDwell,
    Transceive,
    TokenCompute,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::WurListen,
        Category::McuSleep,
        Category::ModeSwitch,
        Category::ActiveDwell,
        Category::Transceive,
        Category::TokenCompute,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::WurListen => "WurListen",
            Category::McuSleep => "McuSleep",
            Category::ModeSwitch => "ModeSwitch",
            Category::ActiveDwell => "ActiveDwell",
            Category::Transceive => "Transceive",
            Category::TokenCompute => "TokenCompute",
        }
    }
}

/// Cumulative energy of a single node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NodeEnergy {
    by_category: [Energy; 6],
    total: Energy,
}

impl NodeEnergy {
    pub fn get(&self, category: Category) -> Energy {
        self.by_category[category.index()]
    }

    pub fn total(&self) -> Energy {
        self.total
    }

    pub fn reconciles(&self) -> bool {
        self.by_category.iter().copied().sum::<Energy>() == self.total
    }

    fn add(&mut self, category: Category, amount: Energy) {
        self.by_category[category.index()] += amount;
        self.total += amount;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EnergyLedger {
    nodes: BTreeMap<NodeId, NodeEnergy>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes(ids: impl IntoIterator<Item = NodeId>) -> Self {
        EnergyLedger {
            nodes: ids
                .into_iter()
                .map(|id| (id, NodeEnergy::default()))
                .collect(),
        }
    }

    pub fn charge(&mut self, node: NodeId, category: Category, amount: Energy) {
        self.nodes.entry(node).or_default().add(category, amount);
    }

    /// Charges an amount given in microjoules; negative or non-finite amounts
    /// are refused and leave the ledger untouched.
    pub fn charge_micro_joules(
        &mut self,
        node: NodeId,
        category: Category,
        uj: f64,
    ) -> Result<(), EnergyError> {
        let amount = Energy::from_micro_joules(uj)?;
        self.charge(node, category, amount);
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> NodeEnergy {
        self.nodes.get(&id).copied().unwrap_or_default()
    }

    pub fn total(&self, id: NodeId) -> Energy {
        self.node(id).total()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &NodeEnergy)> {
        self.nodes.iter().map(|(id, e)| (*id, e))
    }

    pub fn reconciles(&self) -> bool {
        self.nodes.values().all(NodeEnergy::reconciles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params() -> EnergyParams {
        EnergyParams {
            p_switch_uj: 0.0,
            t_active_ms: 0,
            p_active_uw: 0.0,
            p_transceive_uj: 0.0,
            p_byte_uj: 0.0,
            p_wake_uj: 0.0,
            p_compute_uw: 0.0,
            compute_duration_ms: 1.0,
            wur_listen_current_ua: 0.0,
            mcu_sleep_current_na: 0.0,
            supply_voltage_v: 0.0,
        }
    }

    #[test]
    fn scheduled_zero() {
        assert_eq!(scheduled_wakeup_energy(&zero_params()), Energy::ZERO);
    }

    #[test]
    fn scheduled_substitution() {
        let p = EnergyParams {
            p_switch_uj: 1.0,
            t_active_ms: 2,
            p_active_uw: 3.0,
            p_transceive_uj: 4.0,
            ..zero_params()
        };
        let e = scheduled_wakeup_energy(&p);
        assert_eq!(e, Energy::from_pico_joules(6_006_000));
        assert_eq!(e.micro_joules_string(), "6.006");
    }

    #[test]
    fn scheduled_linear_in_t_active() {
        let p = EnergyParams::default();
        let doubled = EnergyParams {
            t_active_ms: p.t_active_ms * 2,
            ..p.clone()
        };
        assert_eq!(
            scheduled_wakeup_energy(&doubled),
            scheduled_wakeup_energy(&p) + p.active_dwell_energy()
        );
    }

    #[test]
    fn maintenance_counts_slots() {
        let p = EnergyParams {
            p_wake_uj: 0.5,
            ..EnergyParams::default()
        };
        let cfg = SlotConfig::new(100, 0).unwrap();
        let per = p.wake_energy() + p.compute_energy();
        assert_eq!(slot_maintenance_energy(&p, &cfg, 1_000), per * 10);
        // partial slot is floored
        assert_eq!(slot_maintenance_energy(&p, &cfg, 1_099), per * 10);
    }

    #[test]
    fn tea_cost_per_slot() {
        let p = EnergyParams {
            p_compute_uw: 7.37,
            compute_duration_ms: 1.0,
            p_wake_uj: 0.0,
            ..EnergyParams::default()
        };
        let cfg = SlotConfig::new(1_000, 0).unwrap();
        assert_eq!(
            slot_maintenance_energy(&p, &cfg, 1_000),
            Energy::from_pico_joules(7_370)
        );
    }

    #[test]
    fn lifetime_math() {
        let h = listen_lifetime(1.2, 2000.0).unwrap();
        assert!((h - 1_666_666.666_7).abs() < 1e-3);
        assert!(h / HOURS_PER_YEAR > 190.0 && h / HOURS_PER_YEAR < 190.3);
        assert_eq!(listen_lifetime(1000.0, 1.0).unwrap(), 1.0);
        assert!(listen_lifetime(0.0, 1.0).is_err());
        assert!(listen_lifetime(-1.0, 1.0).is_err());
        let ten_years = consumption_mah(1.2, 10.0 * HOURS_PER_YEAR);
        assert!((ten_years - 105.192).abs() < 1e-9);
    }

    #[test]
    fn default_powers() {
        let p = EnergyParams::default();
        assert_eq!(p.listen_power(), Power::from_nano_watts(3_600));
        assert_eq!(p.sleep_power(), Power::from_nano_watts(1_950));
        assert_eq!(p.compute_energy(), Energy::from_pico_joules(7_370));
    }

    #[test]
    fn self_discharge_threshold() {
        // 2 %/yr of 2000 mAh at 3 V is 432 J/yr
        let uw = self_discharge_power_uw(2000.0, 2.0, 3.0);
        assert!((uw - 432.0 / SECONDS_PER_YEAR * 1e6).abs() < 1e-12);
        assert!(uw > 13.68 && uw < 13.70);
    }

    #[test]
    fn charge_identity_and_additivity() {
        let mut l = EnergyLedger::with_nodes([NodeId(0)]);
        let before = l.clone();
        l.charge(NodeId(0), Category::Transceive, Energy::ZERO);
        assert_eq!(l, before);
        l.charge(NodeId(0), Category::Transceive, Energy::from_pico_joules(5));
        l.charge(NodeId(0), Category::McuSleep, Energy::from_pico_joules(7));
        assert_eq!(l.total(NodeId(0)), Energy::from_pico_joules(12));
        assert!(l.reconciles());
    }

    #[test]
    fn negative_charge_refused() {
        let mut l = EnergyLedger::new();
        assert!(l
            .charge_micro_joules(NodeId(1), Category::Transceive, -1.0)
            .is_err());
        assert!(l
            .charge_micro_joules(NodeId(1), Category::Transceive, f64::NAN)
            .is_err());
        assert_eq!(l.total(NodeId(1)), Energy::ZERO);
        l.charge_micro_joules(NodeId(1), Category::Transceive, 0.25)
            .unwrap();
        assert_eq!(l.total(NodeId(1)), Energy::from_pico_joules(250_000));
    }

    #[test]
    fn params_validation() {
        assert!(EnergyParams::default().problems().is_empty());
        let bad = EnergyParams {
            p_active_uw: -1.0,
            compute_duration_ms: 0.0,
            ..EnergyParams::default()
        };
        let problems = bad.problems();
        assert_eq!(problems.len(), 2);
        assert!(problems[0].contains("p_active_uw"));
        assert!(problems[1].contains("compute_duration_ms"));
    }

    #[test]
    fn nano_joule_formatting() {
        assert_eq!(
            Energy::from_pico_joules(7_370).nano_joules_string(),
            "7.370"
        );
        assert_eq!(Energy::from_pico_joules(5).nano_joules_string(), "0.005");
        assert_eq!(Energy::ZERO.nano_joules_string(), "0.000");
    }
}

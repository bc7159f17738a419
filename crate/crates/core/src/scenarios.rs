//! Built-in scenario configurations, also shipped as files under
//! `scenarios/`.

pub const REPLAY_ATTACK: &str = include_str!("../scenarios/replay-attack.cfg");
pub const PRIOR_VULNERABILITY: &str = include_str!("../scenarios/prior-vulnerability.cfg");
pub const PRIOR_TRAFFIC_OTP: &str = include_str!("../scenarios/prior-traffic-otp.cfg");
pub const DENIAL_OF_SLEEP: &str = include_str!("../scenarios/denial-of-sleep.cfg");
pub const DUTY_CYCLE: &str = include_str!("../scenarios/duty-cycle.cfg");
pub const QUIESCENT: &str = include_str!("../scenarios/quiescent.cfg");

pub const ALL: [(&str, &str); 6] = [
    ("replay-attack", REPLAY_ATTACK),
    ("prior-vulnerability", PRIOR_VULNERABILITY),
    ("prior-traffic-otp", PRIOR_TRAFFIC_OTP),
    ("denial-of-sleep", DENIAL_OF_SLEEP),
    ("duty-cycle", DUTY_CYCLE),
    ("quiescent", QUIESCENT),
];

/// Looks up a built-in scenario by name, with or without a `.cfg` suffix.
pub fn builtin(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    #[test]
    fn every_builtin_validates_and_names_itself() {
        for (name, text) in ALL {
            let cfg = ScenarioConfig::load(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.scenario, name);
        }
    }

    #[test]
    fn lookup() {
        assert!(builtin("replay-attack.cfg").is_some());
        assert!(builtin("replay-attack").is_some());
        assert!(builtin("nope").is_none());
    }
}

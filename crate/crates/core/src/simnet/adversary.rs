//! Passive eavesdropper that re-broadcasts every wake-up token it hears.
//!
//! The adversary is in radio range of every node. It cannot decrypt, forge
//! or jam; it only replays.

use crate::config::AdversaryConfig;
use crate::otp::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledReplay {
    pub at_ms: u64,
    pub token: Token,
}

/// Replays caused by one captured token: the first after `replay_latency_ms`,
/// then every `replay_interval_ms` until `replay_repeats` broadcasts have
/// been scheduled. Replays at or past `end_ms` are dropped.
pub fn adversary_step(
    captured: Token,
    capture_ms: u64,
    cfg: &AdversaryConfig,
    end_ms: u64,
) -> Vec<ScheduledReplay> {
    if !cfg.enabled {
        return Vec::new();
    }
    (0..u64::from(cfg.replay_repeats))
        .map(|i| capture_ms + cfg.replay_latency_ms + i * cfg.replay_interval_ms)
        .take_while(|&t| t < end_ms)
        .map(|at_ms| ScheduledReplay {
            at_ms,
            token: captured,
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Adversary {
    cfg: AdversaryConfig,
    captured: Vec<(u64, Token)>,
}

impl Adversary {
    pub fn new(cfg: AdversaryConfig) -> Self {
        Adversary {
            cfg,
            captured: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.cfg.enabled
    }

    /// Records a token heard on the channel and returns the replays it
    /// triggers.
    pub fn capture(&mut self, token: Token, now_ms: u64, end_ms: u64) -> Vec<ScheduledReplay> {
        if !self.cfg.enabled {
            return Vec::new();
        }
        self.captured.push((now_ms, token));
        adversary_step(token, now_ms, &self.cfg, end_ms)
    }

    pub fn captured(&self) -> &[(u64, Token)] {
        &self.captured
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::Block64;

    fn tok() -> Token {
        Token::from_wire(Block64(42))
    }

    #[test]
    fn single_replay_after_latency() {
        let cfg = AdversaryConfig {
            enabled: true,
            replay_latency_ms: 0,
            ..AdversaryConfig::default()
        };
        let r = adversary_step(tok(), 100, &cfg, 1_000);
        assert_eq!(
            r,
            vec![ScheduledReplay {
                at_ms: 100,
                token: tok()
            }]
        );
    }

    #[test]
    fn repeats_are_spaced_and_clipped() {
        let cfg = AdversaryConfig {
            enabled: true,
            replay_latency_ms: 5,
            replay_repeats: 10,
            replay_interval_ms: 100,
        };
        let times: Vec<u64> = adversary_step(tok(), 0, &cfg, 300)
            .into_iter()
            .map(|r| r.at_ms)
            .collect();
        assert_eq!(times, vec![5, 105, 205]);
    }

    #[test]
    fn disabled_or_idle_adversary_is_silent() {
        let mut a = Adversary::new(AdversaryConfig::default());
        assert!(a.capture(tok(), 0, 1_000).is_empty());
        assert!(a.captured().is_empty());
        let idle = Adversary::new(AdversaryConfig {
            enabled: true,
            ..AdversaryConfig::default()
        });
        assert!(idle.captured().is_empty());
    }
}

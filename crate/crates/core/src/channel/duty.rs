use crate::time::{SimDuration, SimTime};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DutyCyclePolicy {
    Disabled,
    /// Fraction of time on air per channel, e.g. 0.01.
    Budget { fraction: f64, #[serde(default)] per_channel: BTreeMap<u8, f64> },
    /// No budget, but each transmission is capped in length.
    Dwell { max_ms: u64 },
}

impl Default for DutyCyclePolicy {
    fn default() -> Self {
        DutyCyclePolicy::Budget { fraction: 0.01, per_channel: BTreeMap::new() }
    }
}

impl DutyCyclePolicy {
    pub fn dwell_400ms() -> Self {
        DutyCyclePolicy::Dwell { max_ms: 400 }
    }

    fn fraction_for(&self, channel: u8) -> Option<f64> {
        match self {
            DutyCyclePolicy::Budget { fraction, per_channel } => Some(*per_channel.get(&channel).unwrap_or(fraction)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DutyDecision {
    Allowed,
    Deferred(SimTime),
    /// The frame can never be sent under this policy.
    Disallowed,
}

/// Per-node off-time tracker. After a transmission of length `a` on a
/// channel with budget `f`, that channel is closed for `a (1/f - 1)`.
#[derive(Debug, Clone, Default)]
pub struct DutyCycle {
    next_allowed: HashMap<u8, SimTime>,
}

impl DutyCycle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&self, policy: &DutyCyclePolicy, channel: u8, airtime: SimDuration, now: SimTime) -> DutyDecision {
        match policy {
            DutyCyclePolicy::Disabled => DutyDecision::Allowed,
            DutyCyclePolicy::Dwell { max_ms } => {
                if airtime > SimDuration::from_millis(*max_ms) {
                    DutyDecision::Disallowed
                } else {
                    DutyDecision::Allowed
                }
            }
            DutyCyclePolicy::Budget { .. } => match self.next_allowed.get(&channel) {
                Some(&t) if t > now => DutyDecision::Deferred(t),
                _ => DutyDecision::Allowed,
            },
        }
    }

    pub fn record(&mut self, policy: &DutyCyclePolicy, channel: u8, airtime: SimDuration, start: SimTime) {
        if let Some(f) = policy.fraction_for(channel) {
            if f > 0.0 && f < 1.0 {
                let off = SimDuration::from_secs_f64(airtime.as_secs_f64() * (1.0 / f - 1.0));
                self.next_allowed.insert(channel, start + airtime + off);
            }
        }
    }

    pub fn next_allowed(&self, channel: u8) -> Option<SimTime> {
        self.next_allowed.get(&channel).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{airtime_duration, LoraTxParams};

    #[test]
    fn budget_exhausted_defers() {
        let p = DutyCyclePolicy::default();
        let mut dc = DutyCycle::new();
        let a = SimDuration::from_millis(100);
        let t0 = SimTime::from_secs(10);
        assert_eq!(dc.check(&p, 0, a, t0), DutyDecision::Allowed);
        dc.record(&p, 0, a, t0);
        // 100 ms at 1% closes the channel for 9.9 s after the frame ends
        let until = t0 + SimDuration::from_millis(10_000);
        assert_eq!(dc.check(&p, 0, a, t0 + SimDuration::from_secs(1)), DutyDecision::Deferred(until));
        assert_eq!(dc.check(&p, 0, a, until), DutyDecision::Allowed);
        assert_eq!(dc.check(&p, 1, a, t0), DutyDecision::Allowed);
    }

    #[test]
    fn per_channel_override() {
        let p = DutyCyclePolicy::Budget { fraction: 0.01, per_channel: [(8u8, 0.1)].into_iter().collect() };
        let mut dc = DutyCycle::new();
        dc.record(&p, 8, SimDuration::from_millis(100), SimTime::ZERO);
        assert_eq!(dc.next_allowed(8), Some(SimTime::from_millis(1000)));
    }

    #[test]
    fn disabled_always_allows() {
        let p = DutyCyclePolicy::Disabled;
        let mut dc = DutyCycle::new();
        for i in 0..10 {
            let t = SimTime::from_millis(i);
            dc.record(&p, 0, SimDuration::from_secs(5), t);
            assert_eq!(dc.check(&p, 0, SimDuration::from_secs(5), t), DutyDecision::Allowed);
        }
    }

    #[test]
    fn dwell_rejects_sf12() {
        let p = DutyCyclePolicy::dwell_400ms();
        let dc = DutyCycle::new();
        let slow = airtime_duration(&LoraTxParams::standard(12, 14, 0), 53);
        let fast = airtime_duration(&LoraTxParams::standard(7, 14, 0), 53);
        assert_eq!(dc.check(&p, 0, slow, SimTime::ZERO), DutyDecision::Disallowed);
        assert_eq!(dc.check(&p, 0, fast, SimTime::ZERO), DutyDecision::Allowed);
    }
}

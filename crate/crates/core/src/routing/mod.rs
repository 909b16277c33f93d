//! Route establishment.
//!
//! Uplink routes are built by gateways flooding route establishment messages
//! (REMs) through the mesh; each hop adds the negated RSSI as its cost.
//! Downlink routes are the reverse of the most recent uplink path and carry
//! no cost.

mod downlink;
mod rem;
mod uplink;

pub use downlink::{DownlinkKey, DownlinkNextHop, DownlinkRouteEntry, DownlinkRouteTable};
pub use rem::{RemDecision, RemOriginator, RemState, RoutingState};
pub use uplink::{NoRoute, UplinkChoice, UplinkRouteEntry, UplinkRouteTable};

use crate::time::SimDuration;
use serde::{Deserialize, Serialize};

/// Serial number comparison in modulo-256 space.
pub fn seq_fresher(a: u8, b: u8) -> bool {
    let d = a.wrapping_sub(b);
    d != 0 && d < 128
}

/// Cost of one hop: the negated RSSI, rounded, never negative.
pub fn hop_cost(rssi_dbm: f64) -> u16 {
    if rssi_dbm.is_nan() {
        return u16::MAX;
    }
    (-rssi_dbm).round().clamp(0.0, u16::MAX as f64) as u16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingConfig {
    pub rem_period: SimDuration,
    pub route_ttl: SimDuration,
    pub max_backups: usize,
    /// Upper bound of the random delay before rebroadcasting a REM.
    pub rem_jitter_max: SimDuration,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        let rem_period = SimDuration::from_secs(600);
        RoutingConfig {
            rem_period,
            route_ttl: rem_period.saturating_mul(3),
            max_backups: 4,
            rem_jitter_max: SimDuration::from_millis(500),
        }
    }
}

impl RoutingConfig {
    pub fn with_rem_period(rem_period: SimDuration) -> Self {
        RoutingConfig { rem_period, route_ttl: rem_period.saturating_mul(3), ..Default::default() }
    }
}

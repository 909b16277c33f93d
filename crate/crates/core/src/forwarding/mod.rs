//! Protocol engines for LIMA routers and gateways.
//!
//! Both engines are sans-IO: they take a received frame or an expired timer
//! and return a list of [`Output`]s (transmissions, timers, NS deliveries,
//! drops) for the caller to carry out.

mod gateway;
mod router;
mod rx;
mod state;

pub use gateway::{LimaGateway, NsDelivery};
pub use router::LimaRouter;
pub use rx::RxScheduler;
pub use state::{
    DedupCache, DesignatedMap, DirectReceivableTracker, DmEntry, DnofList, EdRxQueue, EdRxState,
    QueuedDownlink, ReceivableEntry,
};

use crate::codec::{DataRate, DevAddr, LorawanFrameView, Region, TransmissionProfile};
use crate::routing::DownlinkKey;
use crate::time::{SimDuration, SimTime};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardingConfig {
    pub stagger_window: SimDuration,
    pub dm_ttl: SimDuration,
    pub dnof_ttl: SimDuration,
    pub queue_ttl: SimDuration,
    pub dedup_capacity: usize,
    pub dedup_ttl: SimDuration,
    pub receive_delay1: SimDuration,
    pub receive_delay2: SimDuration,
    /// Time between receiving a mesh frame and retransmitting it.
    pub processing_delay: SimDuration,
    pub stp: TransmissionProfile,
    pub region: Region,
    pub mesh_channel: u8,
    /// RX1 uses channel `rx1_channel_base + uplink_channel % 8`.
    pub rx1_channel_base: u8,
    pub rx2_channel: u8,
    pub rx2_sf: u8,
    /// How long an LR remembers a forwarded join request for matching the
    /// join accept.
    pub join_window: SimDuration,
    /// With DER election off every LR that hears an ED forwards it.
    pub der_enabled: bool,
    pub dnof_enabled: bool,
}

impl Default for ForwardingConfig {
    fn default() -> Self {
        ForwardingConfig {
            stagger_window: SimDuration::from_millis(500),
            dm_ttl: SimDuration::from_secs(3600),
            dnof_ttl: SimDuration::from_secs(1800),
            queue_ttl: SimDuration::from_secs(7200),
            dedup_capacity: 256,
            dedup_ttl: SimDuration::from_secs(600),
            receive_delay1: SimDuration::from_secs(1),
            receive_delay2: SimDuration::from_secs(2),
            processing_delay: SimDuration::from_millis(20),
            stp: TransmissionProfile::new(7, 14),
            region: Region::Us915,
            mesh_channel: 17,
            rx1_channel_base: 8,
            rx2_channel: 16,
            rx2_sf: 12,
            join_window: SimDuration::from_secs(6),
            der_enabled: true,
            dnof_enabled: true,
        }
    }
}

impl ForwardingConfig {
    pub fn stp_dr(&self) -> DataRate {
        self.region.dr_for_sf(self.stp.sf).unwrap_or(DataRate(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DropReason {
    Dnof,
    NotDer,
    Duplicate,
    NoRoute,
    Stale,
    TooLarge,
}

impl DropReason {
    pub const ALL: [DropReason; 6] = [
        DropReason::Dnof,
        DropReason::NotDer,
        DropReason::Duplicate,
        DropReason::NoRoute,
        DropReason::Stale,
        DropReason::TooLarge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DropReason::Dnof => "dnof",
            DropReason::NotDer => "not_der",
            DropReason::Duplicate => "duplicate",
            DropReason::NoRoute => "no_route",
            DropReason::Stale => "stale",
            DropReason::TooLarge => "too_large",
        }
    }
}

/// Dedup key of an ED uplink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UplinkKey {
    pub ed: DownlinkKey,
    pub fcnt: u16,
    pub mic: [u8; 4],
}

impl UplinkKey {
    pub fn of(frame: &LorawanFrameView) -> Option<UplinkKey> {
        Some(UplinkKey { ed: DownlinkKey::for_frame(frame)?, fcnt: frame.fcnt.unwrap_or(0), mic: frame.mic })
    }

    pub fn dev_addr(&self) -> Option<DevAddr> {
        match self.ed {
            DownlinkKey::DevAddr(a) => Some(a),
            DownlinkKey::DevEui(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadioTx {
    pub bytes: Vec<u8>,
    pub sf: u8,
    pub power_dbm: i8,
    pub channel: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RxWindow {
    Rx1,
    Rx2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// Send no earlier than `at`. Carrier sensing may push it later.
    Transmit { at: SimTime, tx: RadioTx },
    /// Send at exactly `at`; used for ED receive windows.
    TransmitExact { at: SimTime, tx: RadioTx },
    StaggerTimer { key: UplinkKey, at: SimTime },
    RemTimer { source: crate::codec::LimaNodeId, seq: u8, at: SimTime },
    RxWindowTimer { ed: DownlinkKey, window: RxWindow, at: SimTime },
    Deliver(NsDelivery),
    Drop(DropReason),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForwardingCounters {
    pub uplink_forwards: u64,
    pub downlink_forwards: u64,
    pub rem_sent: u64,
    pub ed_downlinks: u64,
    pub drops: BTreeMap<DropReason, u64>,
}

impl ForwardingCounters {
    pub fn drop(&mut self, reason: DropReason) -> Output {
        *self.drops.entry(reason).or_default() += 1;
        Output::Drop(reason)
    }

    pub fn drops_of(&self, reason: DropReason) -> u64 {
        self.drops.get(&reason).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &ForwardingCounters) {
        self.uplink_forwards += other.uplink_forwards;
        self.downlink_forwards += other.downlink_forwards;
        self.rem_sent += other.rem_sent;
        self.ed_downlinks += other.ed_downlinks;
        for (r, n) in &other.drops {
            *self.drops.entry(*r).or_default() += n;
        }
    }
}

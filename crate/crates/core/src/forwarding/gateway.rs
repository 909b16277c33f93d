use super::rx::RxScheduler;
use super::state::{DedupCache, DirectReceivableTracker};
use super::{DropReason, ForwardingConfig, ForwardingCounters, Output, RadioTx, RxWindow, UplinkKey};
use crate::adr::{NsMetadata, ReceivedVia, SnrHistory};
use crate::codec::{decapsulate, encapsulate, HeaderKind, LimaHeader, LimaNodeId, LorawanFrameView, TransmissionProfile};
use crate::routing::{DownlinkKey, DownlinkNextHop, RemOriginator, RoutingConfig, RoutingState};
use crate::time::SimTime;

/// An uplink handed to the network server.
#[derive(Debug, Clone, PartialEq)]
pub struct NsDelivery {
    pub bytes: Vec<u8>,
    pub key: UplinkKey,
    pub metadata: NsMetadata,
    pub via: ReceivedVia,
    /// SF of the copy that triggered the delivery.
    pub sf: u8,
    pub at: SimTime,
}

/// Protocol state of one LIMA gateway. With `lima` off it behaves as a plain
/// LoRaWAN gateway: no REMs, no tunnel handling.
#[derive(Debug, Clone)]
pub struct LimaGateway {
    pub id: LimaNodeId,
    pub cfg: ForwardingConfig,
    pub lima: bool,
    pub routing: RoutingState,
    pub history: SnrHistory,
    pub tracker: DirectReceivableTracker,
    pub counters: ForwardingCounters,
    originator: RemOriginator,
    rx: RxScheduler,
    up_seen: DedupCache<UplinkKey>,
    seq: u8,
    power_dbm: i8,
}

impl LimaGateway {
    pub fn new(id: LimaNodeId, cfg: ForwardingConfig, routing: RoutingConfig, history_depth: usize, power_dbm: i8, lima: bool) -> Self {
        LimaGateway {
            id,
            cfg,
            lima,
            routing: RoutingState::new(id, routing),
            history: SnrHistory::new(history_depth),
            tracker: DirectReceivableTracker::new(cfg.dnof_ttl),
            counters: ForwardingCounters::default(),
            originator: RemOriginator::new(id),
            rx: RxScheduler::new(&cfg, power_dbm),
            up_seen: DedupCache::new(cfg.dedup_capacity, cfg.dedup_ttl),
            seq: 0,
            power_dbm,
        }
    }

    pub fn rx_scheduler(&self) -> &RxScheduler {
        &self.rx
    }

    fn mesh_tx(&self, bytes: Vec<u8>) -> RadioTx {
        RadioTx { bytes, sf: self.cfg.stp.sf, power_dbm: self.cfg.stp.tx_power_dbm, channel: self.cfg.mesh_channel }
    }

    /// Builds the periodic REM.
    pub fn originate_rem(&mut self, now: SimTime) -> Vec<Output> {
        if !self.lima {
            return Vec::new();
        }
        let dr = self.cfg.stp_dr();
        let cap = self.cfg.region.rem_receivable_capacity(dr).unwrap_or(0);
        self.tracker.purge(now);
        let receivables = self.tracker.take_window(cap, now);
        let h = self.originator.originate(&receivables, self.cfg.stp.code(), self.cfg.region, dr);
        let Ok(bytes) = encapsulate(&[], &h) else {
            return Vec::new();
        };
        self.counters.rem_sent += 1;
        vec![Output::Transmit { at: now, tx: self.mesh_tx(bytes) }]
    }

    fn deliver(&mut self, key: UplinkKey, bytes: Vec<u8>, via: ReceivedVia, snr_db: f64, sf: u8, now: SimTime) -> Output {
        let (snr, dr_string) = key
            .dev_addr()
            .and_then(|a| self.history.metadata_for_ns(a).ok())
            .unwrap_or((snr_db, TransmissionProfile::dr_string(sf)));
        let dev = key.dev_addr().unwrap_or_default();
        Output::Deliver(NsDelivery { bytes, key, metadata: NsMetadata::new(dev, snr, dr_string, self.id), via, sf, at: now })
    }

    /// Frame heard directly from an ED.
    pub fn on_ed_uplink(&mut self, raw: &[u8], snr_db: f64, channel: u8, tp: TransmissionProfile, now: SimTime) -> Vec<Output> {
        let mut out = Vec::new();
        let Ok(frame) = LorawanFrameView::parse(raw) else {
            return out;
        };
        if !frame.mtype.is_uplink() {
            return out;
        }
        let Some(key) = UplinkKey::of(&frame) else {
            return out;
        };
        if let Some(addr) = frame.dev_addr {
            self.history.record(addr, snr_db, tp.sf, ReceivedVia::Direct, now);
            if self.lima && self.cfg.dnof_enabled {
                self.tracker.track(addr, tp, self.cfg.stp, now);
            }
        }
        out.extend(self.rx.on_uplink(&self.cfg, key.ed, channel, tp.sf, now));
        if !self.up_seen.insert(key, now) {
            out.push(self.counters.drop(DropReason::Duplicate));
            return out;
        }
        self.routing.downlink.insert(key.ed, DownlinkNextHop::EdDirect, now);
        out.push(self.deliver(key, raw.to_vec(), ReceivedVia::Direct, snr_db, tp.sf, now));
        out
    }

    pub fn on_lima_frame(&mut self, bytes: &[u8], now: SimTime) -> Vec<Output> {
        if !self.lima {
            return Vec::new();
        }
        let Ok((header, inner)) = decapsulate(bytes) else {
            return Vec::new();
        };
        match header.kind {
            HeaderKind::UplinkData { target } if target == self.id => self.on_tunneled_uplink(&header, inner, now),
            _ => Vec::new(),
        }
    }

    fn on_tunneled_uplink(&mut self, header: &LimaHeader, inner: Vec<u8>, now: SimTime) -> Vec<Output> {
        let Ok(frame) = LorawanFrameView::parse(&inner) else {
            return Vec::new();
        };
        let Some(key) = UplinkKey::of(&frame) else {
            return Vec::new();
        };
        let via = ReceivedVia::Lr(header.sender);
        if let Some(addr) = frame.dev_addr {
            self.history.record(addr, header.ed_snr as f64, header.ed_sf, via, now);
        }
        if !self.up_seen.insert(key, now) {
            return vec![self.counters.drop(DropReason::Duplicate)];
        }
        self.routing.downlink.insert(key.ed, DownlinkNextHop::Lr(header.sender), now);
        vec![self.deliver(key, inner, via, header.ed_snr as f64, header.ed_sf, now)]
    }

    /// A downlink from the NS for `ed`. `rx1_sf` is the SF the NS chose for
    /// a direct RX1 transmission; tunneled copies always use the STP.
    pub fn handle_ns_downlink(&mut self, bytes: Vec<u8>, ed: DownlinkKey, rx1_sf: Option<u8>, now: SimTime) -> Vec<Output> {
        match self.routing.downlink.lookup(&ed, now) {
            Some(DownlinkNextHop::EdDirect) => self.rx.enqueue(ed, bytes, rx1_sf, now),
            Some(DownlinkNextHop::Lr(next)) if self.lima => {
                let seq = self.seq;
                self.seq = self.seq.wrapping_add(1);
                let h = LimaHeader {
                    version: 0,
                    source: self.id,
                    seq,
                    sender: self.id,
                    ed_snr: 0,
                    ed_sf: 0,
                    kind: HeaderKind::DownlinkData { target: next },
                };
                let Ok(frame) = encapsulate(&bytes, &h) else {
                    return vec![self.counters.drop(DropReason::TooLarge)];
                };
                self.counters.downlink_forwards += 1;
                vec![Output::Transmit { at: now, tx: self.mesh_tx(frame) }]
            }
            _ => vec![self.counters.drop(DropReason::NoRoute)],
        }
    }

    pub fn on_rx_window(&mut self, ed: DownlinkKey, window: RxWindow, now: SimTime) -> Vec<Output> {
        self.rx.on_window(&self.cfg, &mut self.counters, ed, window, now)
    }

    pub fn power_dbm(&self) -> i8 {
        self.power_dbm
    }

    pub fn tick(&mut self, now: SimTime) {
        self.routing.expire(now);
        self.tracker.purge(now);
    }
}

use super::rx::RxScheduler;
use super::state::{DedupCache, DesignatedMap, DnofList};
use super::{DropReason, ForwardingConfig, ForwardingCounters, Output, RadioTx, RxWindow, UplinkKey};
use crate::codec::{
    decapsulate, encapsulate, DevEui, HeaderKind, LimaHeader, LimaNodeId, LorawanFrameView, MType,
};
use crate::routing::{DownlinkKey, DownlinkNextHop, RemDecision, RoutingConfig, RoutingState};
use crate::time::{SimDuration, SimTime};
use rand::Rng;
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone)]
struct PendingStagger {
    raw: Vec<u8>,
    snr_db: i8,
    sf: u8,
}

/// Protocol state of one LIMA router.
#[derive(Debug, Clone)]
pub struct LimaRouter {
    pub id: LimaNodeId,
    pub cfg: ForwardingConfig,
    pub routing: RoutingState,
    pub dm: DesignatedMap,
    pub dnof: DnofList,
    pub counters: ForwardingCounters,
    rx: RxScheduler,
    up_seen: DedupCache<UplinkKey>,
    down_seen: DedupCache<(LimaNodeId, u8)>,
    pending: BTreeMap<UplinkKey, PendingStagger>,
    pending_rem: BTreeMap<(LimaNodeId, u8), LimaHeader>,
    recent_joins: VecDeque<(DevEui, SimTime)>,
    seq: u8,
}

impl LimaRouter {
    pub fn new(id: LimaNodeId, cfg: ForwardingConfig, routing: RoutingConfig) -> Self {
        LimaRouter {
            id,
            cfg,
            routing: RoutingState::new(id, routing),
            dm: DesignatedMap::new(cfg.dm_ttl),
            dnof: DnofList::new(cfg.dnof_ttl),
            counters: ForwardingCounters::default(),
            rx: RxScheduler::new(&cfg, cfg.stp.tx_power_dbm),
            up_seen: DedupCache::new(cfg.dedup_capacity, cfg.dedup_ttl),
            down_seen: DedupCache::new(cfg.dedup_capacity, cfg.dedup_ttl),
            pending: BTreeMap::new(),
            pending_rem: BTreeMap::new(),
            recent_joins: VecDeque::new(),
            seq: 0,
        }
    }

    pub fn rx_scheduler(&self) -> &RxScheduler {
        &self.rx
    }

    pub fn has_pending_stagger(&self, key: &UplinkKey) -> bool {
        self.pending.contains_key(key)
    }

    /// True if this LR currently acts as DER for the ED.
    pub fn is_der(&self, ed: &DownlinkKey, now: SimTime) -> bool {
        self.dm.get(ed, now).is_some_and(|e| e.is_der)
    }

    fn next_seq(&mut self) -> u8 {
        let s = self.seq;
        self.seq = self.seq.wrapping_add(1);
        s
    }

    fn mesh_tx(&self, bytes: Vec<u8>) -> RadioTx {
        RadioTx { bytes, sf: self.cfg.stp.sf, power_dbm: self.cfg.stp.tx_power_dbm, channel: self.cfg.mesh_channel }
    }

    /// A frame without LIMA prefix heard from an ED. `now` is the end of
    /// the reception.
    pub fn on_ed_uplink<R: Rng + ?Sized>(&mut self, raw: &[u8], snr_db: f64, channel: u8, sf: u8, now: SimTime, rng: &mut R) -> Vec<Output> {
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
            if self.dnof.contains(addr, now) {
                out.push(self.counters.drop(DropReason::Dnof));
                return out;
            }
        }
        out.extend(self.rx.on_uplink(&self.cfg, key.ed, channel, sf, now));
        if self.cfg.region.validate_ingress(&frame, self.cfg.stp_dr()).is_err() {
            out.push(self.counters.drop(DropReason::TooLarge));
            return out;
        }
        if self.up_seen.contains(&key, now) {
            out.push(self.counters.drop(DropReason::Duplicate));
            return out;
        }
        let snr_q = LimaHeader::quantize_snr(snr_db);
        if !self.cfg.der_enabled {
            out.extend(self.forward_from_ed(key, raw.to_vec(), snr_q, sf, now, rng));
            return out;
        }
        match self.dm.get(&key.ed, now) {
            Some(e) if e.is_der => {
                self.dm.set_snr(&key.ed, snr_q);
                out.extend(self.forward_from_ed(key, raw.to_vec(), snr_q, sf, now, rng));
            }
            Some(_) => {
                self.dm.set_snr(&key.ed, snr_q);
                out.push(self.counters.drop(DropReason::NotDer));
            }
            None => {
                if !self.pending.contains_key(&key) {
                    let w = self.cfg.stagger_window.as_micros();
                    let delay = SimDuration::from_micros(rng.gen_range(0..=w));
                    self.pending.insert(key, PendingStagger { raw: raw.to_vec(), snr_db: snr_q, sf });
                    out.push(Output::StaggerTimer { key, at: now + delay });
                }
            }
        }
        out
    }

    /// Stagger timer expiry: forward and become DER unless the uplink was
    /// overheard in the meantime.
    pub fn on_stagger_timer<R: Rng + ?Sized>(&mut self, key: UplinkKey, now: SimTime, rng: &mut R) -> Vec<Output> {
        let Some(p) = self.pending.remove(&key) else {
            return Vec::new();
        };
        if self.up_seen.contains(&key, now) {
            return Vec::new();
        }
        self.dm.insert(key.ed, true, p.snr_db, now);
        self.forward_from_ed(key, p.raw, p.snr_db, p.sf, now, rng)
    }

    fn forward_from_ed<R: Rng + ?Sized>(&mut self, key: UplinkKey, raw: Vec<u8>, snr_q: i8, sf: u8, now: SimTime, rng: &mut R) -> Vec<Output> {
        let choice = match self.routing.select_uplink(now, rng) {
            Ok(c) => c,
            Err(_) => return vec![self.counters.drop(DropReason::NoRoute)],
        };
        let header = LimaHeader {
            version: 0,
            source: self.id,
            seq: self.next_seq(),
            sender: self.id,
            ed_snr: snr_q,
            ed_sf: sf,
            kind: HeaderKind::UplinkData { target: choice.next_hop },
        };
        let Ok(bytes) = encapsulate(&raw, &header) else {
            return vec![self.counters.drop(DropReason::TooLarge)];
        };
        self.up_seen.insert(key, now);
        if let DownlinkKey::DevEui(eui) = key.ed {
            self.recent_joins.push_back((eui, now));
            while self.recent_joins.len() > 16 {
                self.recent_joins.pop_front();
            }
        }
        self.routing.downlink.insert(key.ed, DownlinkNextHop::EdDirect, now);
        self.counters.uplink_forwards += 1;
        vec![Output::Transmit { at: now + self.cfg.processing_delay, tx: self.mesh_tx(bytes) }]
    }

    /// Any frame carrying the LIMA prefix, addressed to us or overheard.
    pub fn on_lima_frame<R: Rng + ?Sized>(&mut self, bytes: &[u8], rssi_dbm: f64, now: SimTime, rng: &mut R) -> Vec<Output> {
        let Ok((header, inner)) = decapsulate(bytes) else {
            return Vec::new();
        };
        if header.sender == self.id {
            return Vec::new();
        }
        match &header.kind {
            HeaderKind::Rem(_) => self.on_rem(header, rssi_dbm, now, rng),
            HeaderKind::UplinkData { target } => {
                let target = *target;
                self.on_lima_uplink(header, target, inner, now, rng)
            }
            HeaderKind::DownlinkData { target } => {
                let target = *target;
                self.on_lima_downlink(header, target, inner, now)
            }
            HeaderKind::Reserved(_) => Vec::new(),
        }
    }

    fn on_rem<R: Rng + ?Sized>(&mut self, header: LimaHeader, rssi_dbm: f64, now: SimTime, rng: &mut R) -> Vec<Output> {
        if let Some(opts) = header.rem() {
            if self.cfg.dnof_enabled {
                self.dnof.update(&opts.direct_receivables, now);
            }
        }
        match self.routing.process_rem(&header, rssi_dbm, now) {
            RemDecision::UpdatePrimaryAndRebroadcast => {
                let jitter = SimDuration::from_micros(rng.gen_range(0..=self.routing.config.rem_jitter_max.as_micros()));
                let key = (header.source, header.seq);
                self.pending_rem.retain(|(s, _), _| *s != header.source);
                self.pending_rem.insert(key, header);
                vec![Output::RemTimer { source: key.0, seq: key.1, at: now + self.cfg.processing_delay + jitter }]
            }
            RemDecision::BackupOnly | RemDecision::Discard => Vec::new(),
        }
    }

    pub fn on_rem_timer(&mut self, source: LimaNodeId, seq: u8, now: SimTime) -> Vec<Output> {
        let Some(original) = self.pending_rem.remove(&(source, seq)) else {
            return Vec::new();
        };
        let receivables = original.rem().map(|o| o.direct_receivables.clone()).unwrap_or_default();
        let tp_code = self.cfg.stp.code();
        let Some(h) = self.routing.rebroadcast_header(&original, &receivables, tp_code, self.cfg.region, self.cfg.stp_dr(), now) else {
            return Vec::new();
        };
        let Ok(bytes) = encapsulate(&[], &h) else {
            return Vec::new();
        };
        self.counters.rem_sent += 1;
        vec![Output::Transmit { at: now, tx: self.mesh_tx(bytes) }]
    }

    fn on_lima_uplink<R: Rng + ?Sized>(&mut self, mut header: LimaHeader, target: LimaNodeId, inner: Vec<u8>, now: SimTime, rng: &mut R) -> Vec<Output> {
        let Ok(frame) = LorawanFrameView::parse(&inner) else {
            return Vec::new();
        };
        let Some(key) = UplinkKey::of(&frame) else {
            return Vec::new();
        };
        // someone else forwarded this ED's uplink
        if let Some(p) = self.pending.get(&key) {
            if header.ed_snr >= p.snr_db {
                self.pending.remove(&key);
            }
        }
        if let Some(e) = self.dm.get(&key.ed, now) {
            if e.is_der && header.ed_snr > e.last_snr_db {
                self.dm.resign(&key.ed);
            }
        }
        if target != self.id {
            return Vec::new();
        }
        if !self.up_seen.insert(key, now) {
            return vec![self.counters.drop(DropReason::Duplicate)];
        }
        self.pending.remove(&key);
        let choice = match self.routing.select_uplink(now, rng) {
            Ok(c) => c,
            Err(_) => return vec![self.counters.drop(DropReason::NoRoute)],
        };
        let prev = header.sender;
        self.routing.downlink.insert(key.ed, DownlinkNextHop::Lr(prev), now);
        header.sender = self.id;
        header.set_target(choice.next_hop);
        let Ok(bytes) = encapsulate(&inner, &header) else {
            return vec![self.counters.drop(DropReason::TooLarge)];
        };
        self.counters.uplink_forwards += 1;
        vec![Output::Transmit { at: now + self.cfg.processing_delay, tx: self.mesh_tx(bytes) }]
    }

    fn downlink_key(&mut self, frame: &LorawanFrameView, now: SimTime) -> Option<DownlinkKey> {
        if frame.mtype == MType::JoinAccept {
            let window = self.cfg.join_window;
            self.recent_joins.retain(|(_, t)| now.since(*t) <= window);
            return self.recent_joins.back().map(|(eui, _)| DownlinkKey::DevEui(*eui));
        }
        frame.dev_addr.map(DownlinkKey::DevAddr)
    }

    fn on_lima_downlink(&mut self, mut header: LimaHeader, target: LimaNodeId, inner: Vec<u8>, now: SimTime) -> Vec<Output> {
        if target != self.id {
            return Vec::new();
        }
        if !self.down_seen.insert((header.source, header.seq), now) {
            return vec![self.counters.drop(DropReason::Duplicate)];
        }
        let Ok(frame) = LorawanFrameView::parse(&inner) else {
            return Vec::new();
        };
        let Some(key) = self.downlink_key(&frame, now) else {
            return vec![self.counters.drop(DropReason::NoRoute)];
        };
        match self.routing.downlink.lookup(&key, now) {
            Some(DownlinkNextHop::Lr(next)) => {
                header.sender = self.id;
                header.set_target(next);
                let Ok(bytes) = encapsulate(&inner, &header) else {
                    return vec![self.counters.drop(DropReason::TooLarge)];
                };
                self.counters.downlink_forwards += 1;
                vec![Output::Transmit { at: now + self.cfg.processing_delay, tx: self.mesh_tx(bytes) }]
            }
            Some(DownlinkNextHop::EdDirect) => self.rx.enqueue(key, inner, None, now + self.cfg.processing_delay),
            None => vec![self.counters.drop(DropReason::NoRoute)],
        }
    }

    pub fn on_rx_window(&mut self, ed: DownlinkKey, window: RxWindow, now: SimTime) -> Vec<Output> {
        self.rx.on_window(&self.cfg, &mut self.counters, ed, window, now)
    }

    /// Housekeeping: expire routes and aged per-ED state.
    pub fn tick(&mut self, now: SimTime) {
        self.routing.expire(now);
        self.dm.purge(now);
        self.dnof.purge(now);
    }
}

use crate::codec::{DevAddr, TransmissionProfile};
use crate::routing::DownlinkKey;
use crate::time::{SimDuration, SimTime};
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmEntry {
    pub is_der: bool,
    /// Quantized SNR of the latest direct reception.
    pub last_snr_db: i8,
    pub created_at: SimTime,
}

/// Per-ED record of whether this LR is the designated entry router.
#[derive(Debug, Clone, Default)]
pub struct DesignatedMap {
    entries: BTreeMap<DownlinkKey, DmEntry>,
    ttl: SimDuration,
}

impl DesignatedMap {
    pub fn new(ttl: SimDuration) -> Self {
        DesignatedMap { entries: BTreeMap::new(), ttl }
    }

    pub fn get(&self, ed: &DownlinkKey, now: SimTime) -> Option<DmEntry> {
        self.entries.get(ed).filter(|e| now.since(e.created_at) <= self.ttl).copied()
    }

    pub fn insert(&mut self, ed: DownlinkKey, is_der: bool, snr_db: i8, now: SimTime) {
        self.entries.insert(ed, DmEntry { is_der, last_snr_db: snr_db, created_at: now });
    }

    pub fn set_snr(&mut self, ed: &DownlinkKey, snr_db: i8) {
        if let Some(e) = self.entries.get_mut(ed) {
            e.last_snr_db = snr_db;
        }
    }

    pub fn resign(&mut self, ed: &DownlinkKey) {
        if let Some(e) = self.entries.get_mut(ed) {
            e.is_der = false;
        }
    }

    pub fn purge(&mut self, now: SimTime) {
        let ttl = self.ttl;
        self.entries.retain(|_, e| now.since(e.created_at) <= ttl);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DownlinkKey, &DmEntry)> {
        self.entries.iter()
    }
}

/// EDs that some LG hears directly at or below the STP.
#[derive(Debug, Clone, Default)]
pub struct DnofList {
    entries: BTreeMap<DevAddr, SimTime>,
    ttl: SimDuration,
}

impl DnofList {
    pub fn new(ttl: SimDuration) -> Self {
        DnofList { entries: BTreeMap::new(), ttl }
    }

    pub fn update(&mut self, receivables: &[DevAddr], now: SimTime) {
        for &a in receivables {
            self.entries.insert(a, now);
        }
        self.purge(now);
    }

    pub fn contains(&self, addr: DevAddr, now: SimTime) -> bool {
        self.entries.get(&addr).is_some_and(|&t| now.since(t) <= self.ttl)
    }

    pub fn purge(&mut self, now: SimTime) {
        let ttl = self.ttl;
        self.entries.retain(|_, &mut t| now.since(t) <= ttl);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Bounded seen-set with TTL. Oldest keys are evicted first.
#[derive(Debug, Clone)]
pub struct DedupCache<K: Ord + Clone> {
    seen: BTreeMap<K, SimTime>,
    order: VecDeque<(K, SimTime)>,
    capacity: usize,
    ttl: SimDuration,
}

impl<K: Ord + Clone> DedupCache<K> {
    pub fn new(capacity: usize, ttl: SimDuration) -> Self {
        DedupCache { seen: BTreeMap::new(), order: VecDeque::new(), capacity: capacity.max(1), ttl }
    }

    pub fn contains(&self, key: &K, now: SimTime) -> bool {
        self.seen.get(key).is_some_and(|&t| now.since(t) <= self.ttl)
    }

    /// Records `key`; returns true if it was not already present.
    pub fn insert(&mut self, key: K, now: SimTime) -> bool {
        self.evict(now);
        if self.contains(&key, now) {
            return false;
        }
        self.seen.insert(key.clone(), now);
        self.order.push_back((key, now));
        while self.seen.len() > self.capacity {
            self.pop_oldest();
        }
        true
    }

    fn pop_oldest(&mut self) {
        if let Some((k, t)) = self.order.pop_front() {
            if self.seen.get(&k) == Some(&t) {
                self.seen.remove(&k);
            }
        }
    }

    fn evict(&mut self, now: SimTime) {
        while let Some((_, t)) = self.order.front() {
            if now.since(*t) > self.ttl {
                self.pop_oldest();
            } else {
                break;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Receive windows the ED opens after its latest uplink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdRxState {
    pub rx1_time: SimTime,
    pub rx2_time: SimTime,
    pub uplink_channel: u8,
    pub uplink_sf: u8,
    pub rx2_timer_active: bool,
    pub rx1_scheduled: bool,
    pub rx2_scheduled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedDownlink {
    pub bytes: Vec<u8>,
    pub enqueued_at: SimTime,
    /// SF the NS asked for in RX1, for direct transmissions from an LG.
    pub rx1_sf: Option<u8>,
}

/// Per-ED FIFO of downlinks waiting for a receive window.
#[derive(Debug, Clone, Default)]
pub struct EdRxQueue {
    queues: BTreeMap<DownlinkKey, VecDeque<QueuedDownlink>>,
    ttl: SimDuration,
}

impl EdRxQueue {
    pub fn new(ttl: SimDuration) -> Self {
        EdRxQueue { queues: BTreeMap::new(), ttl }
    }

    pub fn push(&mut self, ed: DownlinkKey, item: QueuedDownlink) {
        self.queues.entry(ed).or_default().push_back(item);
    }

    pub fn len(&self, ed: &DownlinkKey) -> usize {
        self.queues.get(ed).map_or(0, |q| q.len())
    }

    /// Pops the oldest fresh entry. Also returns how many stale entries
    /// were thrown away on the way.
    pub fn pop_fresh(&mut self, ed: &DownlinkKey, now: SimTime) -> (Option<QueuedDownlink>, usize) {
        let Some(q) = self.queues.get_mut(ed) else {
            return (None, 0);
        };
        let mut stale = 0;
        while let Some(item) = q.pop_front() {
            if now.since(item.enqueued_at) > self.ttl {
                stale += 1;
                continue;
            }
            return (Some(item), stale);
        }
        (None, stale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceivableEntry {
    pub dev_addr: DevAddr,
    pub last_seen: SimTime,
    pub tp: TransmissionProfile,
}

/// LG-side list of EDs heard directly at or below the STP, read out in
/// rotating windows so every ED gets advertised.
#[derive(Debug, Clone, Default)]
pub struct DirectReceivableTracker {
    entries: Vec<ReceivableEntry>,
    pointer: usize,
    ttl: SimDuration,
}

impl DirectReceivableTracker {
    pub fn new(ttl: SimDuration) -> Self {
        DirectReceivableTracker { entries: Vec::new(), pointer: 0, ttl }
    }

    /// Adds or refreshes `addr` iff `tp` is at or below `stp`.
    pub fn track(&mut self, addr: DevAddr, tp: TransmissionProfile, stp: TransmissionProfile, now: SimTime) -> bool {
        if !tp.at_or_below(&stp) {
            return false;
        }
        match self.entries.iter_mut().find(|e| e.dev_addr == addr) {
            Some(e) => {
                e.last_seen = now;
                e.tp = tp;
            }
            None => self.entries.push(ReceivableEntry { dev_addr: addr, last_seen: now, tp }),
        }
        true
    }

    /// Up to `max` fresh addresses starting at the rotation pointer.
    pub fn take_window(&mut self, max: usize, now: SimTime) -> Vec<DevAddr> {
        let ttl = self.ttl;
        let n = self.entries.len();
        if n == 0 || max == 0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut last = None;
        for step in 0..n {
            let i = (self.pointer + step) % n;
            let e = &self.entries[i];
            if now.since(e.last_seen) > ttl {
                continue;
            }
            out.push(e.dev_addr);
            last = Some(i);
            if out.len() == max {
                break;
            }
        }
        if let Some(i) = last {
            self.pointer = (i + 1) % n;
        }
        out
    }

    pub fn purge(&mut self, now: SimTime) {
        let ttl = self.ttl;
        let before = self.entries.len();
        let keep_upto_pointer = self.entries[..self.pointer.min(before)]
            .iter()
            .filter(|e| now.since(e.last_seen) <= ttl)
            .count();
        self.entries.retain(|e| now.since(e.last_seen) <= ttl);
        self.pointer = if self.entries.is_empty() { 0 } else { keep_upto_pointer % self.entries.len() };
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

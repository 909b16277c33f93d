use super::downlink::DownlinkRouteTable;
use super::uplink::{NoRoute, UplinkChoice, UplinkRouteTable};
use super::{hop_cost, seq_fresher, RoutingConfig};
use crate::codec::{DataRate, DevAddr, HeaderKind, LimaHeader, LimaNodeId, Region, RemOptions};
use crate::time::SimTime;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemDecision {
    /// First copy of a fresh REM: primary now points at the sender and the
    /// REM should be rebroadcast once.
    UpdatePrimaryAndRebroadcast,
    /// Recorded as a backup route, no rebroadcast.
    BackupOnly,
    Discard,
}

/// Freshness bookkeeping per REM source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RemState {
    last_seq: BTreeMap<LimaNodeId, u8>,
    rebroadcast: BTreeSet<(LimaNodeId, u8)>,
}

impl RemState {
    pub fn last_seq(&self, source: LimaNodeId) -> Option<u8> {
        self.last_seq.get(&source).copied()
    }

    pub fn is_fresh(&self, source: LimaNodeId, seq: u8) -> bool {
        self.last_seq(source).map_or(true, |last| seq_fresher(seq, last))
    }

    /// Marks (source, seq) as rebroadcast. Returns false if it already was.
    pub fn claim_rebroadcast(&mut self, source: LimaNodeId, seq: u8) -> bool {
        // keep only the current generation per source
        self.rebroadcast.retain(|&(s, q)| s != source || q == seq);
        self.rebroadcast.insert((source, seq))
    }
}

/// Gateway side: numbers and builds periodic REMs.
#[derive(Debug, Clone, PartialEq)]
pub struct RemOriginator {
    pub id: LimaNodeId,
    next_seq: u8,
}

impl RemOriginator {
    pub fn new(id: LimaNodeId) -> Self {
        RemOriginator { id, next_seq: 0 }
    }

    /// Builds the next REM. The receivables list is truncated to what fits
    /// at `dr`.
    pub fn originate(&mut self, receivables: &[DevAddr], tp_code: u8, region: Region, dr: DataRate) -> LimaHeader {
        let cap = region.rem_receivable_capacity(dr).unwrap_or(0);
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        LimaHeader {
            version: 0,
            source: self.id,
            seq,
            sender: self.id,
            ed_snr: 0,
            ed_sf: 0,
            kind: HeaderKind::Rem(RemOptions {
                tp_code,
                cost_from_source: 0,
                direct_receivables: receivables.iter().take(cap).copied().collect(),
            }),
        }
    }
}

/// All routing state of one LR or LG.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingState {
    pub id: LimaNodeId,
    pub config: RoutingConfig,
    pub uplink: UplinkRouteTable,
    pub downlink: DownlinkRouteTable,
    pub rem: RemState,
}

impl RoutingState {
    pub fn new(id: LimaNodeId, config: RoutingConfig) -> Self {
        RoutingState {
            id,
            config,
            uplink: UplinkRouteTable::new(config.route_ttl, config.max_backups),
            downlink: DownlinkRouteTable::new(config.route_ttl),
            rem: RemState::default(),
        }
    }

    /// Handles a received REM header.
    pub fn process_rem(&mut self, rem: &LimaHeader, rssi_dbm: f64, now: SimTime) -> RemDecision {
        let Some(opts) = rem.rem() else {
            return RemDecision::Discard;
        };
        if rem.source == self.id || rem.sender == self.id {
            return RemDecision::Discard;
        }
        let cost = opts.cost_from_source.saturating_add(hop_cost(rssi_dbm));
        if self.rem.is_fresh(rem.source, rem.seq) {
            self.rem.last_seq.insert(rem.source, rem.seq);
            self.uplink.upsert(rem.source, rem.sender, cost, rem.seq, now, true);
            if self.rem.claim_rebroadcast(rem.source, rem.seq) {
                return RemDecision::UpdatePrimaryAndRebroadcast;
            }
            return RemDecision::BackupOnly;
        }
        match self.uplink.entry(rem.source, rem.sender) {
            Some(e) if !seq_fresher(rem.seq, e.seq_tag) => RemDecision::Discard,
            _ => {
                self.uplink.upsert(rem.source, rem.sender, cost, rem.seq, now, false);
                RemDecision::BackupOnly
            }
        }
    }

    /// The header to rebroadcast for a REM accepted earlier. The advertised
    /// cost is the best live cost at send time, so copies that arrived
    /// during the rebroadcast delay are taken into account.
    pub fn rebroadcast_header(&self, original: &LimaHeader, receivables: &[DevAddr], tp_code: u8, region: Region, dr: DataRate, now: SimTime) -> Option<LimaHeader> {
        let opts = original.rem()?;
        let cost = self.uplink.best_cost(original.source, now).unwrap_or(opts.cost_from_source);
        let cap = region.rem_receivable_capacity(dr).unwrap_or(0);
        let mut h = original.clone();
        h.sender = self.id;
        h.kind = HeaderKind::Rem(RemOptions {
            tp_code,
            cost_from_source: cost,
            direct_receivables: receivables.iter().take(cap).copied().collect(),
        });
        Some(h)
    }

    pub fn select_uplink<R: Rng + ?Sized>(&self, now: SimTime, rng: &mut R) -> Result<UplinkChoice, NoRoute> {
        self.uplink.select(now, rng)
    }

    pub fn expire(&mut self, now: SimTime) {
        self.uplink.expire(now);
        self.downlink.expire(now);
    }

    /// Tab-separated dump: direction, key, next_hop, cost, seq_tag, age_s.
    pub fn dump(&self, now: SimTime) -> Vec<String> {
        let mut out = Vec::new();
        for e in self.uplink.entries() {
            out.push(format!(
                "up{}\t{}\t{}\t{}\t{}\t{:.1}",
                if e.primary { "" } else { "-backup" },
                e.dest_lg,
                e.next_hop,
                e.cost,
                e.seq_tag,
                now.since(e.learned_at).as_secs_f64()
            ));
        }
        for (k, e) in self.downlink.iter() {
            out.push(format!("down\t{}\t{}\t-\t-\t{:.1}", k, e.next_hop, now.since(e.learned_at).as_secs_f64()));
        }
        out
    }
}

use crate::codec::LimaNodeId;
use crate::time::{SimDuration, SimTime};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UplinkRouteEntry {
    pub dest_lg: LimaNodeId,
    pub next_hop: LimaNodeId,
    pub cost: u16,
    pub seq_tag: u8,
    pub learned_at: SimTime,
    pub primary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no live uplink route")]
pub struct NoRoute;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UplinkChoice {
    pub dest_lg: LimaNodeId,
    pub next_hop: LimaNodeId,
    pub cost: u16,
}

/// One entry per (LG, neighbor). The primary is the neighbor that delivered
/// the freshest REM first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UplinkRouteTable {
    by_lg: BTreeMap<LimaNodeId, Vec<UplinkRouteEntry>>,
    ttl: SimDuration,
    max_backups: usize,
}

impl UplinkRouteTable {
    pub fn new(ttl: SimDuration, max_backups: usize) -> Self {
        UplinkRouteTable { by_lg: BTreeMap::new(), ttl, max_backups }
    }

    pub fn ttl(&self) -> SimDuration {
        self.ttl
    }

    pub fn is_empty(&self) -> bool {
        self.by_lg.values().all(|v| v.is_empty())
    }

    pub fn entries(&self) -> impl Iterator<Item = &UplinkRouteEntry> {
        self.by_lg.values().flatten()
    }

    pub fn entries_for(&self, lg: LimaNodeId) -> &[UplinkRouteEntry] {
        self.by_lg.get(&lg).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn entry(&self, lg: LimaNodeId, next_hop: LimaNodeId) -> Option<&UplinkRouteEntry> {
        self.entries_for(lg).iter().find(|e| e.next_hop == next_hop)
    }

    pub fn primary(&self, lg: LimaNodeId) -> Option<&UplinkRouteEntry> {
        self.entries_for(lg).iter().find(|e| e.primary)
    }

    fn alive(&self, e: &UplinkRouteEntry, now: SimTime) -> bool {
        now.since(e.learned_at) <= self.ttl
    }

    /// Inserts or refreshes the entry via `next_hop`. A primary upsert
    /// demotes the previous primary.
    pub fn upsert(&mut self, lg: LimaNodeId, next_hop: LimaNodeId, cost: u16, seq_tag: u8, now: SimTime, primary: bool) {
        let max_backups = self.max_backups;
        let list = self.by_lg.entry(lg).or_default();
        if primary {
            for e in list.iter_mut() {
                e.primary = false;
            }
        }
        if let Some(e) = list.iter_mut().find(|e| e.next_hop == next_hop) {
            e.cost = cost;
            e.seq_tag = seq_tag;
            e.learned_at = now;
            e.primary |= primary;
        } else {
            list.push(UplinkRouteEntry { dest_lg: lg, next_hop, cost, seq_tag, learned_at: now, primary });
        }
        let has_primary = list.iter().any(|e| e.primary);
        if !has_primary {
            if let Some(e) = list.iter_mut().find(|e| e.next_hop == next_hop) {
                e.primary = true;
            }
        }
        let cap = max_backups + 1;
        while list.len() > cap {
            // evict the stalest backup
            let victim = list
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.primary && e.next_hop != next_hop)
                .min_by_key(|(_, e)| e.learned_at)
                .map(|(i, _)| i);
            match victim {
                Some(i) => {
                    list.remove(i);
                }
                None => break,
            }
        }
    }

    /// Lowest cost over live entries for `lg`.
    pub fn best_cost(&self, lg: LimaNodeId, now: SimTime) -> Option<u16> {
        self.entries_for(lg).iter().filter(|e| self.alive(e, now)).map(|e| e.cost).min()
    }

    /// Least-cost live entry over every LG, ties broken uniformly at random.
    pub fn select<R: Rng + ?Sized>(&self, now: SimTime, rng: &mut R) -> Result<UplinkChoice, NoRoute> {
        let live: Vec<&UplinkRouteEntry> = self.entries().filter(|e| self.alive(e, now)).collect();
        let best = live.iter().map(|e| e.cost).min().ok_or(NoRoute)?;
        let ties: Vec<&&UplinkRouteEntry> = live.iter().filter(|e| e.cost == best).collect();
        let pick = if ties.len() == 1 { ties[0] } else { ties[rng.gen_range(0..ties.len())] };
        Ok(UplinkChoice { dest_lg: pick.dest_lg, next_hop: pick.next_hop, cost: pick.cost })
    }

    /// Drops entries older than the TTL and promotes the freshest backup
    /// wherever the primary went away.
    pub fn expire(&mut self, now: SimTime) {
        let ttl = self.ttl;
        for list in self.by_lg.values_mut() {
            list.retain(|e| now.since(e.learned_at) <= ttl);
            if !list.is_empty() && !list.iter().any(|e| e.primary) {
                let fresh = list.iter_mut().max_by_key(|e| e.learned_at).expect("nonempty");
                fresh.primary = true;
            }
        }
        self.by_lg.retain(|_, v| !v.is_empty());
    }
}

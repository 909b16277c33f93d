//! Tunneled ADR.
//!
//! The LG keeps the last `h` SNR readings per ED, whether heard directly or
//! carried in the `ed_snr` field of a tunneled frame, and reports the best of
//! them to the network server. The server side runs a margin-based ADR.

use crate::channel::RadioModel;
use crate::codec::{DataRate, DevAddr, LimaNodeId, Region, TransmissionProfile};
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

pub const DEFAULT_HISTORY_DEPTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReceivedVia {
    Direct,
    Lr(LimaNodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRecord {
    pub snr_db: f64,
    pub sf: u8,
    pub via: ReceivedVia,
    pub at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no SNR history for {0}")]
pub struct NoHistory(pub DevAddr);

#[derive(Debug, Clone, PartialEq)]
pub struct SnrHistory {
    depth: usize,
    rings: BTreeMap<DevAddr, VecDeque<SnrRecord>>,
}

impl Default for SnrHistory {
    fn default() -> Self {
        SnrHistory::new(DEFAULT_HISTORY_DEPTH)
    }
}

impl SnrHistory {
    pub fn new(depth: usize) -> Self {
        assert!(depth > 0, "history depth must be positive");
        SnrHistory { depth, rings: BTreeMap::new() }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn record(&mut self, ed: DevAddr, snr_db: f64, sf: u8, via: ReceivedVia, now: SimTime) {
        let ring = self.rings.entry(ed).or_default();
        if ring.len() == self.depth {
            ring.pop_front();
        }
        ring.push_back(SnrRecord { snr_db, sf, via, at: now });
    }

    pub fn records(&self, ed: DevAddr) -> impl Iterator<Item = &SnrRecord> {
        self.rings.get(&ed).into_iter().flatten()
    }

    /// Highest-SNR record; among equal SNRs the most recent wins.
    pub fn best(&self, ed: DevAddr) -> Result<&SnrRecord, NoHistory> {
        let ring = self.rings.get(&ed).ok_or(NoHistory(ed))?;
        let mut best: Option<&SnrRecord> = None;
        for r in ring {
            if best.map_or(true, |b| r.snr_db >= b.snr_db) {
                best = Some(r);
            }
        }
        best.ok_or(NoHistory(ed))
    }

    /// SNR and data rate string to hand to the NS.
    pub fn metadata_for_ns(&self, ed: DevAddr) -> Result<(f64, String), NoHistory> {
        self.best(ed).map(|r| (r.snr_db, TransmissionProfile::dr_string(r.sf)))
    }

    pub fn clear(&mut self, ed: DevAddr) {
        self.rings.remove(&ed);
    }
}

/// Uplink metadata as an LG reports it to the NS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsMetadata {
    pub dev_addr: String,
    pub snr_db: f64,
    pub dr_string: String,
    pub gateway_id: String,
}

impl NsMetadata {
    pub fn new(dev_addr: DevAddr, snr_db: f64, dr_string: String, gateway: LimaNodeId) -> Self {
        NsMetadata { dev_addr: dev_addr.to_string(), snr_db, dr_string, gateway_id: gateway.to_string() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metadata serializes")
    }

    /// SF parsed back out of `dr_string`.
    pub fn sf(&self) -> Option<u8> {
        let rest = self.dr_string.strip_prefix("SF")?;
        let end = rest.find("BW")?;
        rest[..end].parse().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdrParams {
    pub region: Region,
    pub min_power_dbm: i8,
    pub max_power_dbm: i8,
    pub device_margin_db: f64,
}

impl Default for AdrParams {
    fn default() -> Self {
        AdrParams { region: Region::Us915, min_power_dbm: 2, max_power_dbm: 14, device_margin_db: 10.0 }
    }
}

impl AdrParams {
    /// Fastest 125 kHz data rate.
    pub fn top_dr(&self) -> DataRate {
        match self.region {
            Region::Us915 => DataRate(3),
            Region::Eu868 => DataRate(5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdrDecision {
    pub new_dr: DataRate,
    pub new_power_dbm: i8,
}

impl AdrDecision {
    /// Power index as carried in LinkADRReq: power = 30 dBm - 2 * index.
    pub fn tx_power_index(&self) -> u8 {
        ((30 - self.new_power_dbm as i16).max(0) / 2) as u8
    }
}

pub fn power_from_index(index: u8) -> i8 {
    (30 - 2 * index as i16) as i8
}

/// Margin-based ADR step. Returns `None` when nothing would change.
pub fn ns_compute_adr(snr_db: f64, current_dr: DataRate, current_power_dbm: i8, params: &AdrParams) -> Option<AdrDecision> {
    let sf = params.region.sf(current_dr).ok()?;
    let margin = snr_db - RadioModel::<f64>::required_snr_db(sf) - params.device_margin_db;
    let mut nstep = (margin / 3.0).floor() as i32;
    let mut dr = current_dr;
    let mut power = current_power_dbm.clamp(params.min_power_dbm, params.max_power_dbm);
    let top = params.top_dr();
    while nstep > 0 && dr < top {
        dr = DataRate(dr.0 + 1);
        nstep -= 1;
    }
    while nstep > 0 && power > params.min_power_dbm {
        power = (power - 2).max(params.min_power_dbm);
        nstep -= 1;
    }
    while nstep < 0 && power < params.max_power_dbm {
        power = (power + 2).min(params.max_power_dbm);
        nstep += 1;
    }
    if dr == current_dr && power == current_power_dbm {
        None
    } else {
        Some(AdrDecision { new_dr: dr, new_power_dbm: power })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ED: DevAddr = DevAddr(0x2601_0001);

    fn push(h: &mut SnrHistory, snr: f64, t: u64) {
        h.record(ED, snr, 7, ReceivedVia::Direct, SimTime::from_secs(t));
    }

    #[test]
    fn ring_keeps_last_h() {
        let mut h = SnrHistory::new(3);
        for (i, s) in [3.5, 7.7, 3.6, 7.6, 7.3].into_iter().enumerate() {
            push(&mut h, s, i as u64);
        }
        let held: Vec<f64> = h.records(ED).map(|r| r.snr_db).collect();
        assert_eq!(held, vec![3.6, 7.6, 7.3]);
        assert_eq!(h.metadata_for_ns(ED).unwrap().0, 7.6);
    }

    #[test]
    fn two_entry_lrs_each_count() {
        let mut h = SnrHistory::new(5);
        h.record(ED, 4.0, 9, ReceivedVia::Lr(LimaNodeId(1)), SimTime::ZERO);
        h.record(ED, 9.0, 7, ReceivedVia::Lr(LimaNodeId(2)), SimTime::ZERO);
        assert_eq!(h.records(ED).count(), 2);
        assert_eq!(h.metadata_for_ns(ED).unwrap(), (9.0, "SF7BW125".to_string()));
    }

    #[test]
    fn ties_go_to_latest_and_empty_errors() {
        let mut h = SnrHistory::new(5);
        assert_eq!(h.metadata_for_ns(ED), Err(NoHistory(ED)));
        h.record(ED, 5.0, 10, ReceivedVia::Direct, SimTime::ZERO);
        h.record(ED, 5.0, 8, ReceivedVia::Direct, SimTime::from_secs(1));
        assert_eq!(h.best(ED).unwrap().sf, 8);
    }

    #[test]
    fn max_selection_exhaustive() {
        let vals = [-3.0, 0.0, 2.5, 7.0];
        for n in 1..=4usize {
            let total = vals.len().pow(n as u32);
            for code in 0..total {
                let mut h = SnrHistory::new(3);
                let mut seq = Vec::new();
                let mut c = code;
                for i in 0..n {
                    let v = vals[c % vals.len()];
                    c /= vals.len();
                    seq.push(v);
                    push(&mut h, v, i as u64);
                }
                let window = &seq[seq.len().saturating_sub(3)..];
                let want = window.iter().cloned().fold(f64::MIN, f64::max);
                assert_eq!(h.best(ED).unwrap().snr_db, want);
                assert_eq!(h.records(ED).count(), window.len());
            }
        }
    }

    #[test]
    fn metadata_json_shape() {
        let m = NsMetadata::new(ED, 7.5, "SF9BW125".into(), LimaNodeId(0x10));
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["dev_addr"], "26010001");
        assert_eq!(v["gateway_id"], "0x0010");
        assert_eq!(m.sf(), Some(9));
    }

    #[test]
    fn strong_link_at_dr1_climbs_then_lowers_power() {
        // DR1 = SF9 (req -12.5); snr 10 -> margin 12.5 -> 4 steps: DR2, DR3, then -4 dB
        let p = AdrParams::default();
        let d = ns_compute_adr(10.0, DataRate(1), 14, &p).unwrap();
        assert_eq!(d, AdrDecision { new_dr: DataRate(3), new_power_dbm: 10 });
    }

    #[test]
    fn zero_margin_no_change() {
        let p = AdrParams::default();
        // SF9: -12.5 + 10 margin
        assert_eq!(ns_compute_adr(-2.5, DataRate(1), 14, &p), None);
    }

    #[test]
    fn weak_link_raises_power() {
        let p = AdrParams::default();
        let d = ns_compute_adr(-20.0, DataRate(1), 6, &p).unwrap();
        assert_eq!(d.new_dr, DataRate(1));
        assert!(d.new_power_dbm > 6);
        assert_eq!(ns_compute_adr(-20.0, DataRate(1), 14, &p), None);
    }

    #[test]
    fn power_index_matches_footnote() {
        let d = AdrDecision { new_dr: DataRate(0), new_power_dbm: 14 };
        assert_eq!(d.tx_power_index(), 8);
        assert_eq!(power_from_index(8), 14);
    }

    proptest! {
        #[test]
        fn power_nonincreasing_in_snr(dr in 0u8..=5, pw in 1u8..=7, a in -30.0f64..30.0, b in -30.0f64..30.0) {
            let p = AdrParams { region: Region::Eu868, ..AdrParams::default() };
            let power = (pw * 2) as i8;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let out = |s| ns_compute_adr(s, DataRate(dr), power, &p).map_or((DataRate(dr), power), |d| (d.new_dr, d.new_power_dbm));
            let (dr_lo, p_lo) = out(lo);
            let (dr_hi, p_hi) = out(hi);
            prop_assert!(dr_hi >= dr_lo);
            if dr_hi == dr_lo {
                prop_assert!(p_hi <= p_lo);
            }
            prop_assert!((p.min_power_dbm..=p.max_power_dbm).contains(&p_hi));
        }
    }
}

//! In-process network server: cross-gateway dedup and ADR.

use crate::adr::{ns_compute_adr, AdrDecision, AdrParams};
use crate::codec::{DevAddr, FrameBuilder, LorawanFrameView, MType, MacCommand, FCTRL_ADR};
use crate::forwarding::NsDelivery;
use crate::routing::DownlinkKey;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
struct DeviceSession {
    believed_power_dbm: i8,
    pending: Option<AdrDecision>,
    /// Uplinks seen at the device's current settings.
    since_change: usize,
    fcnt_down: u16,
}

/// A downlink the NS wants sent through the delivering gateway.
#[derive(Debug, Clone, PartialEq)]
pub struct NsDownlink {
    pub bytes: Vec<u8>,
    pub key: DownlinkKey,
    pub rx1_sf: u8,
    pub decision: Option<AdrDecision>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NsOutcome {
    /// First copy of this (DevAddr, FCnt) at the NS.
    pub fresh: bool,
    pub downlink: Option<NsDownlink>,
}

#[derive(Debug, Clone)]
pub struct NetworkServer {
    params: AdrParams,
    history_depth: usize,
    adr_enabled: bool,
    initial_power_dbm: i8,
    seen: BTreeSet<(DevAddr, u16)>,
    sessions: BTreeMap<DevAddr, DeviceSession>,
    pub adr_commands: u64,
}

impl NetworkServer {
    pub fn new(params: AdrParams, history_depth: usize, adr_enabled: bool, initial_power_dbm: i8) -> Self {
        NetworkServer {
            params,
            history_depth,
            adr_enabled,
            initial_power_dbm,
            seen: BTreeSet::new(),
            sessions: BTreeMap::new(),
            adr_commands: 0,
        }
    }

    pub fn on_uplink(&mut self, d: &NsDelivery) -> NsOutcome {
        let Ok(frame) = LorawanFrameView::parse(&d.bytes) else {
            return NsOutcome::default();
        };
        let (Some(addr), Some(fcnt)) = (frame.dev_addr, frame.fcnt) else {
            return NsOutcome::default();
        };
        if !self.seen.insert((addr, fcnt)) {
            return NsOutcome::default();
        }
        let h = self.history_depth;
        let s = self.sessions.entry(addr).or_insert(DeviceSession {
            believed_power_dbm: self.initial_power_dbm,
            pending: None,
            since_change: h,
            fcnt_down: 0,
        });
        s.since_change += 1;
        let answered = MacCommand::parse_fopts(frame.fopts(), false)
            .iter()
            .any(|c| matches!(c, MacCommand::LinkAdrAns { .. }));
        if answered {
            if let Some(dec) = s.pending.take() {
                s.believed_power_dbm = dec.new_power_dbm;
                s.since_change = 1;
            }
        }
        let mut outcome = NsOutcome { fresh: true, downlink: None };
        if !self.adr_enabled || frame.fctrl.unwrap_or(0) & FCTRL_ADR == 0 {
            return outcome;
        }
        let key = DownlinkKey::DevAddr(addr);
        if frame.adr_ack_req() {
            // The device may have backed off on its own: assume full power
            // and let the history refill before the next decision.
            s.believed_power_dbm = self.params.max_power_dbm;
            s.pending = None;
            s.since_change = 1;
            outcome.downlink = Some(Self::downlink(s, addr, key, d.sf, None));
            return outcome;
        }
        if s.since_change < h {
            return outcome;
        }
        let Some(dr) = self.params.region.dr_for_sf(d.sf) else {
            return outcome;
        };
        if let Some(dec) = ns_compute_adr(d.metadata.snr_db, dr, s.believed_power_dbm, &self.params) {
            s.pending = Some(dec);
            s.since_change = 0;
            self.adr_commands += 1;
            outcome.downlink = Some(Self::downlink(s, addr, key, d.sf, Some(dec)));
        }
        outcome
    }

    fn downlink(s: &mut DeviceSession, addr: DevAddr, key: DownlinkKey, rx1_sf: u8, decision: Option<AdrDecision>) -> NsDownlink {
        let mut b = FrameBuilder::data(MType::UnconfirmedDataDown, addr, s.fcnt_down);
        s.fcnt_down = s.fcnt_down.wrapping_add(1);
        if let Some(dec) = decision {
            b = b.command(MacCommand::LinkAdrReq { dr: dec.new_dr.0, tx_power_index: dec.tx_power_index() });
        }
        NsDownlink { bytes: b.build([0; 4]), key, rx1_sf, decision }
    }
}

//! Class-A end device: periodic unconfirmed uplinks, two receive windows,
//! LinkADRReq handling and the ADR_ACK backoff.

use super::scenario::DeviceConfig;
use crate::adr::power_from_index;
use crate::channel::{DutyCycle, EnergyLedger, Position};
use crate::codec::{DevAddr, FrameBuilder, LorawanFrameView, MType, MacCommand, Region, DataRate, FCTRL_ADR, FCTRL_ADR_ACK_REQ};
use crate::time::SimTime;

/// One open receive window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxSlot {
    pub at: SimTime,
    pub channel: u8,
    pub sf: u8,
    /// A downlink addressed to us started exactly at `at`.
    pub locked: bool,
}

#[derive(Debug, Clone)]
pub struct EndDevice {
    pub dev_addr: DevAddr,
    pub position: Position,
    pub sf: u8,
    pub power_dbm: i8,
    pub fcnt: u16,
    pub adr_ack_cnt: u32,
    pub pending_ans: bool,
    pub duty: DutyCycle,
    pub energy: EnergyLedger<f64>,
    pub rx1: Option<RxSlot>,
    pub rx2: Option<RxSlot>,
    pub downlinks_received: u64,
    /// Packet waiting for duty-cycle clearance.
    pub waiting: Option<u16>,
    cfg: DeviceConfig,
    region: Region,
}

impl EndDevice {
    pub fn new(dev_addr: DevAddr, position: Position, cfg: DeviceConfig, region: Region) -> Self {
        EndDevice {
            dev_addr,
            position,
            sf: cfg.initial_sf,
            power_dbm: cfg.initial_power_dbm,
            fcnt: 0,
            adr_ack_cnt: 0,
            pending_ans: false,
            duty: DutyCycle::new(),
            energy: EnergyLedger::new(),
            rx1: None,
            rx2: None,
            downlinks_received: 0,
            waiting: None,
            cfg,
            region,
        }
    }

    /// Takes the next frame counter for a freshly generated packet.
    pub fn next_fcnt(&mut self) -> u16 {
        let f = self.fcnt;
        self.fcnt = self.fcnt.wrapping_add(1);
        f
    }

    /// Builds the uplink for `fcnt` and advances the ADR backoff.
    pub fn build_uplink(&mut self, fcnt: u16, app_bytes: usize, adr: bool) -> Vec<u8> {
        let mut bits = 0;
        if adr {
            bits |= FCTRL_ADR;
            if self.adr_ack_cnt >= self.cfg.adr_ack_limit {
                bits |= FCTRL_ADR_ACK_REQ;
            }
        }
        let mut b = FrameBuilder::data(MType::UnconfirmedDataUp, self.dev_addr, fcnt).fctrl_bits(bits);
        if self.pending_ans {
            b = b.command(MacCommand::LinkAdrAns { status: 0x07 });
            self.pending_ans = false;
        }
        let mic = (self.dev_addr.0 ^ fcnt as u32).to_le_bytes();
        let frame = b.payload(1, vec![0xA5; app_bytes]).build(mic);
        if adr {
            self.backoff_step();
        }
        frame
    }

    // Counts uplinks without any downlink; past the limit plus delay the
    // device first restores full power, then lowers its DR one step per delay.
    fn backoff_step(&mut self) {
        self.adr_ack_cnt += 1;
        let limit = self.cfg.adr_ack_limit;
        let delay = self.cfg.adr_ack_delay.max(1);
        if self.adr_ack_cnt >= limit + delay && (self.adr_ack_cnt - limit) % delay == 0 {
            if self.power_dbm < self.cfg.max_power_dbm {
                self.power_dbm = self.cfg.max_power_dbm;
            } else if self.sf < 12 {
                self.sf += 1;
            }
        }
    }

    /// Opens RX1 and RX2 after an uplink that ended at `end`.
    pub fn open_windows(&mut self, end: SimTime, uplink_channel: u8, rx1: crate::time::SimDuration, rx2: crate::time::SimDuration, rx1_base: u8, rx2_channel: u8, rx2_sf: u8) {
        self.rx1 = Some(RxSlot { at: end + rx1, channel: rx1_base + uplink_channel % 8, sf: self.sf, locked: false });
        self.rx2 = Some(RxSlot { at: end + rx2, channel: rx2_channel, sf: rx2_sf, locked: false });
    }

    /// Whether a transmission starting now on (channel, sf) hits an open
    /// window; locks it if so.
    pub fn try_lock(&mut self, start: SimTime, channel: u8, sf: u8) -> bool {
        for slot in [&mut self.rx1, &mut self.rx2].into_iter().flatten() {
            if slot.at == start && slot.channel == channel && slot.sf == sf {
                slot.locked = true;
                return true;
            }
        }
        false
    }

    /// A downlink decoded in one of the windows.
    pub fn on_downlink(&mut self, raw: &[u8]) -> bool {
        let Ok(frame) = LorawanFrameView::parse(raw) else {
            return false;
        };
        if frame.mtype.is_uplink() || frame.dev_addr != Some(self.dev_addr) {
            return false;
        }
        self.downlinks_received += 1;
        self.adr_ack_cnt = 0;
        self.rx2 = None;
        for cmd in MacCommand::parse_fopts(frame.fopts(), true) {
            if let MacCommand::LinkAdrReq { dr, tx_power_index } = cmd {
                if let Ok(sf) = self.region.sf(DataRate(dr)) {
                    self.sf = sf;
                }
                self.power_dbm = power_from_index(tx_power_index).clamp(self.cfg.min_power_dbm, self.cfg.max_power_dbm);
                self.pending_ans = true;
            }
        }
        true
    }
}

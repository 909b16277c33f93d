//! Read-only view over a LoRaWAN PHYPayload, plus a small frame builder used
//! by the simulator's end-device and network-server models.
//!
//! Only the unencrypted header fields are interpreted. FRMPayload and MIC are
//! carried as opaque bytes.

use super::ids::{DevAddr, DevEui};
use super::CodecError;

/// MHDR + FHDR (no FOpts) + FPort + MIC.
pub const ED_FRAME_OVERHEAD: usize = 1 + 7 + 1 + 4;

pub const FCTRL_ADR: u8 = 0x80;
pub const FCTRL_ADR_ACK_REQ: u8 = 0x40;

const MIC_LEN: usize = 4;
const FHDR_MIN: usize = 7;
const JOIN_REQUEST_LEN: usize = 1 + 8 + 8 + 2 + MIC_LEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MType {
    JoinRequest = 0,
    JoinAccept = 1,
    UnconfirmedDataUp = 2,
    UnconfirmedDataDown = 3,
    ConfirmedDataUp = 4,
    ConfirmedDataDown = 5,
    RejoinRequest = 6,
    Proprietary = 7,
}

impl MType {
    pub fn from_mhdr(mhdr: u8) -> MType {
        match mhdr >> 5 {
            0 => MType::JoinRequest,
            1 => MType::JoinAccept,
            2 => MType::UnconfirmedDataUp,
            3 => MType::UnconfirmedDataDown,
            4 => MType::ConfirmedDataUp,
            5 => MType::ConfirmedDataDown,
            6 => MType::RejoinRequest,
            _ => MType::Proprietary,
        }
    }

    pub fn is_data(self) -> bool {
        matches!(
            self,
            MType::UnconfirmedDataUp
                | MType::UnconfirmedDataDown
                | MType::ConfirmedDataUp
                | MType::ConfirmedDataDown
        )
    }

    pub fn is_uplink(self) -> bool {
        matches!(
            self,
            MType::JoinRequest | MType::UnconfirmedDataUp | MType::ConfirmedDataUp | MType::RejoinRequest
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            MType::JoinRequest => "JoinRequest",
            MType::JoinAccept => "JoinAccept",
            MType::UnconfirmedDataUp => "UnconfirmedDataUp",
            MType::UnconfirmedDataDown => "UnconfirmedDataDown",
            MType::ConfirmedDataUp => "ConfirmedDataUp",
            MType::ConfirmedDataDown => "ConfirmedDataDown",
            MType::RejoinRequest => "RejoinRequest",
            MType::Proprietary => "Proprietary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LorawanFrameView {
    pub mtype: MType,
    pub dev_addr: Option<DevAddr>,
    pub dev_eui: Option<DevEui>,
    pub fctrl: Option<u8>,
    pub fcnt: Option<u16>,
    pub mic: [u8; 4],
    raw: Vec<u8>,
}

impl LorawanFrameView {
    pub fn parse(raw: &[u8]) -> Result<LorawanFrameView, CodecError> {
        if raw.len() < 1 + MIC_LEN {
            return Err(CodecError::MalformedLorawan("shorter than MHDR + MIC"));
        }
        let mtype = MType::from_mhdr(raw[0]);
        let mut mic = [0u8; 4];
        mic.copy_from_slice(&raw[raw.len() - MIC_LEN..]);
        let mut view = LorawanFrameView {
            mtype,
            dev_addr: None,
            dev_eui: None,
            fctrl: None,
            fcnt: None,
            mic,
            raw: raw.to_vec(),
        };
        match mtype {
            MType::JoinRequest => {
                if raw.len() < JOIN_REQUEST_LEN {
                    return Err(CodecError::MalformedLorawan("short join request"));
                }
                let mut eui = [0u8; 8];
                eui.copy_from_slice(&raw[9..17]);
                view.dev_eui = Some(DevEui(u64::from_le_bytes(eui)));
            }
            t if t.is_data() => {
                if raw.len() < 1 + FHDR_MIN + MIC_LEN {
                    return Err(CodecError::MalformedLorawan("short data frame"));
                }
                view.dev_addr = Some(DevAddr(u32::from_le_bytes([raw[1], raw[2], raw[3], raw[4]])));
                let fctrl = raw[5];
                let fopts_len = (fctrl & 0x0F) as usize;
                if raw.len() < 1 + FHDR_MIN + fopts_len + MIC_LEN {
                    return Err(CodecError::MalformedLorawan("FOpts overrun"));
                }
                view.fctrl = Some(fctrl);
                view.fcnt = Some(u16::from_le_bytes([raw[6], raw[7]]));
            }
            _ => {}
        }
        Ok(view)
    }

    pub fn raw(&self) -> &[u8] {
        &self.raw
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.raw
    }

    /// Bytes between MHDR and MIC.
    pub fn mac_payload_len(&self) -> usize {
        self.raw.len() - 1 - MIC_LEN
    }

    pub fn adr_ack_req(&self) -> bool {
        self.fctrl.is_some_and(|f| f & FCTRL_ADR_ACK_REQ != 0)
    }

    /// FOpts bytes of a data frame; empty for other types.
    pub fn fopts(&self) -> &[u8] {
        match self.fctrl {
            Some(f) => &self.raw[8..8 + (f & 0x0F) as usize],
            None => &[],
        }
    }

    /// FRMPayload after the optional FPort byte.
    pub fn frm_payload(&self) -> &[u8] {
        match self.fctrl {
            Some(f) => {
                let start = 8 + (f & 0x0F) as usize;
                let end = self.raw.len() - MIC_LEN;
                if start < end {
                    &self.raw[start + 1..end]
                } else {
                    &[]
                }
            }
            None => &[],
        }
    }
}

/// MAC commands exchanged by the simulator's ED and NS models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacCommand {
    /// `dr` and `tx_power_index` share one byte; `ch_mask` and redundancy are fixed.
    LinkAdrReq { dr: u8, tx_power_index: u8 },
    LinkAdrAns { status: u8 },
}

impl MacCommand {
    const LINK_ADR: u8 = 0x03;

    pub fn write(&self, out: &mut Vec<u8>) {
        match *self {
            MacCommand::LinkAdrReq { dr, tx_power_index } => {
                out.extend_from_slice(&[Self::LINK_ADR, (dr << 4) | (tx_power_index & 0x0F), 0xFF, 0x00, 0x01])
            }
            MacCommand::LinkAdrAns { status } => out.extend_from_slice(&[Self::LINK_ADR, status]),
        }
    }

    /// Parses FOpts in the given direction; unknown commands stop parsing.
    pub fn parse_fopts(fopts: &[u8], downlink: bool) -> Vec<MacCommand> {
        let mut cmds = Vec::new();
        let mut i = 0;
        while i < fopts.len() {
            match (fopts[i], downlink) {
                (Self::LINK_ADR, true) if i + 5 <= fopts.len() => {
                    let b = fopts[i + 1];
                    cmds.push(MacCommand::LinkAdrReq {
                        dr: b >> 4,
                        tx_power_index: b & 0x0F,
                    });
                    i += 5;
                }
                (Self::LINK_ADR, false) if i + 2 <= fopts.len() => {
                    cmds.push(MacCommand::LinkAdrAns { status: fopts[i + 1] });
                    i += 2;
                }
                _ => break,
            }
        }
        cmds
    }
}

/// Builds data and join frames with an opaque, caller-supplied MIC.
#[derive(Debug, Clone)]
pub struct FrameBuilder {
    mtype: MType,
    dev_addr: DevAddr,
    fctrl: u8,
    fcnt: u16,
    fopts: Vec<u8>,
    fport: Option<u8>,
    payload: Vec<u8>,
}

impl FrameBuilder {
    pub fn data(mtype: MType, dev_addr: DevAddr, fcnt: u16) -> FrameBuilder {
        FrameBuilder {
            mtype,
            dev_addr,
            fctrl: 0,
            fcnt,
            fopts: Vec::new(),
            fport: None,
            payload: Vec::new(),
        }
    }

    pub fn fctrl_bits(mut self, bits: u8) -> Self {
        self.fctrl |= bits & 0xF0;
        self
    }

    pub fn command(mut self, cmd: MacCommand) -> Self {
        cmd.write(&mut self.fopts);
        self
    }

    pub fn payload(mut self, fport: u8, data: Vec<u8>) -> Self {
        self.fport = Some(fport);
        self.payload = data;
        self
    }

    pub fn build(self, mic: [u8; 4]) -> Vec<u8> {
        assert!(self.fopts.len() <= 15, "FOpts longer than 15 bytes");
        let mut out = Vec::with_capacity(ED_FRAME_OVERHEAD + self.fopts.len() + self.payload.len());
        out.push((self.mtype as u8) << 5);
        out.extend_from_slice(&self.dev_addr.0.to_le_bytes());
        out.push(self.fctrl | self.fopts.len() as u8);
        out.extend_from_slice(&self.fcnt.to_le_bytes());
        out.extend_from_slice(&self.fopts);
        if let Some(port) = self.fport {
            out.push(port);
            out.extend_from_slice(&self.payload);
        }
        out.extend_from_slice(&mic);
        out
    }

    pub fn join_request(join_eui: u64, dev_eui: DevEui, dev_nonce: u16, mic: [u8; 4]) -> Vec<u8> {
        let mut out = Vec::with_capacity(JOIN_REQUEST_LEN);
        out.push((MType::JoinRequest as u8) << 5);
        out.extend_from_slice(&join_eui.to_le_bytes());
        out.extend_from_slice(&dev_eui.0.to_le_bytes());
        out.extend_from_slice(&dev_nonce.to_le_bytes());
        out.extend_from_slice(&mic);
        out
    }
}

//! Regional data-rate tables and payload caps.

use super::header::{DATA_OVERHEAD, HEADER_BASE_LEN};
use super::lorawan::LorawanFrameView;
use super::CodecError;
use serde::{Deserialize, Serialize};
use std::fmt;

/// FHDR without FOpts plus FPort: the gap between MACPayload and application payload.
const MAC_TO_APP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataRate(pub u8);

impl fmt::Display for DataRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DR{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// 125 kHz uplink ladder DR0 (SF10) .. DR3 (SF7), DR4 is SF8 at 500 kHz.
    #[default]
    Us915,
    /// DR0 (SF12) .. DR5 (SF7), all at 125 kHz.
    Eu868,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadCap {
    Bytes(usize),
    Unsupported,
}

impl Region {
    pub fn max_dr(self) -> DataRate {
        match self {
            Region::Us915 => DataRate(4),
            Region::Eu868 => DataRate(5),
        }
    }

    fn check(self, dr: DataRate) -> Result<(), CodecError> {
        if dr > self.max_dr() {
            Err(CodecError::UnknownDr(dr.0))
        } else {
            Ok(())
        }
    }

    pub fn sf(self, dr: DataRate) -> Result<u8, CodecError> {
        self.check(dr)?;
        Ok(match self {
            Region::Us915 => [10, 9, 8, 7, 8][dr.0 as usize],
            Region::Eu868 => 12 - dr.0,
        })
    }

    pub fn bandwidth_khz(self, dr: DataRate) -> Result<u32, CodecError> {
        self.check(dr)?;
        Ok(match (self, dr.0) {
            (Region::Us915, 4) => 500,
            _ => 125,
        })
    }

    /// 125 kHz data rate using `sf`, if the region has one.
    pub fn dr_for_sf(self, sf: u8) -> Option<DataRate> {
        match self {
            Region::Us915 => match sf {
                7..=10 => Some(DataRate(10 - sf)),
                _ => None,
            },
            Region::Eu868 => match sf {
                7..=12 => Some(DataRate(12 - sf)),
                _ => None,
            },
        }
    }

    /// Maximum MACPayload size `M`.
    pub fn max_mac_payload(self, dr: DataRate) -> Result<usize, CodecError> {
        self.check(dr)?;
        Ok(match self {
            Region::Us915 => [19, 61, 133, 250, 250][dr.0 as usize],
            Region::Eu868 => [59, 59, 59, 123, 230, 230][dr.0 as usize],
        })
    }

    /// Application payload cap, reduced by the tunnel overhead when `lima` is set.
    pub fn max_app_payload(self, dr: DataRate, lima: bool) -> Result<PayloadCap, CodecError> {
        let plain = self.max_mac_payload(dr)? - MAC_TO_APP;
        if !lima {
            return Ok(PayloadCap::Bytes(plain));
        }
        Ok(match plain.checked_sub(DATA_OVERHEAD) {
            Some(n) if n > 0 => PayloadCap::Bytes(n),
            _ => PayloadCap::Unsupported,
        })
    }

    /// Accepts an ED frame for tunneling iff its MACPayload is at most `M - 9`.
    pub fn validate_ingress(self, frame: &LorawanFrameView, dr: DataRate) -> Result<(), CodecError> {
        let max = self.max_mac_payload(dr)? - HEADER_BASE_LEN;
        let len = frame.mac_payload_len();
        if len > max {
            Err(CodecError::TooLarge { len, max })
        } else {
            Ok(())
        }
    }

    /// Direct receivables that fit in a REM sent at `dr`.
    pub fn rem_receivable_capacity(self, dr: DataRate) -> Result<usize, CodecError> {
        let m = self.max_mac_payload(dr)?;
        Ok(m.saturating_sub(HEADER_BASE_LEN + super::header::REM_FIXED_OPTIONS_LEN) / 4)
    }
}

/// Payload cap in the default (US-like) plan.
pub fn max_app_payload(dr: DataRate, lima: bool) -> Result<PayloadCap, CodecError> {
    Region::Us915.max_app_payload(dr, lima)
}

pub fn validate_ingress(frame: &LorawanFrameView, dr: DataRate) -> Result<(), CodecError> {
    Region::Us915.validate_ingress(frame, dr)
}

/// (SF, bandwidth, power) tuple. Bandwidth is fixed at 125 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransmissionProfile {
    pub sf: u8,
    pub tx_power_dbm: i8,
}

impl TransmissionProfile {
    pub const BANDWIDTH_KHZ: u32 = 125;

    pub fn new(sf: u8, tx_power_dbm: i8) -> Self {
        TransmissionProfile { sf, tx_power_dbm }
    }

    /// `self` is higher than `other` if its SF or its power is higher.
    pub fn is_higher_than(&self, other: &TransmissionProfile) -> bool {
        self.sf > other.sf || self.tx_power_dbm > other.tx_power_dbm
    }

    pub fn at_or_below(&self, other: &TransmissionProfile) -> bool {
        !self.is_higher_than(other)
    }

    /// One-byte code: SF offset in the high nibble, power/2 in the low nibble.
    pub fn code(&self) -> u8 {
        let sf = self.sf.clamp(7, 12) - 7;
        let pw = (self.tx_power_dbm.clamp(0, 30) / 2) as u8;
        sf << 4 | pw
    }

    pub fn from_code(code: u8) -> TransmissionProfile {
        TransmissionProfile {
            sf: 7 + (code >> 4).min(5),
            tx_power_dbm: ((code & 0x0F) * 2) as i8,
        }
    }

    /// Packet-forwarder style data rate string, e.g. `SF7BW125`.
    pub fn dr_string(sf: u8) -> String {
        format!("SF{sf}BW{}", Self::BANDWIDTH_KHZ)
    }
}

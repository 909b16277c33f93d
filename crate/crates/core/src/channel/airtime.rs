use crate::scalar::Scalar;
use crate::time::SimDuration;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoraTxParams {
    pub sf: u8,
    pub bw_hz: u32,
    /// Coding rate index: 1 for 4/5 up to 4 for 4/8.
    pub cr: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
    pub tx_power_dbm: i8,
    pub channel: u8,
}

impl LoraTxParams {
    /// SF at 125 kHz, CR 4/5, 8 preamble symbols, explicit header, CRC on.
    pub fn standard(sf: u8, tx_power_dbm: i8, channel: u8) -> Self {
        assert!((7..=12).contains(&sf), "spreading factor {sf} out of range");
        LoraTxParams {
            sf,
            bw_hz: 125_000,
            cr: 1,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
            tx_power_dbm,
            channel,
        }
    }

    /// Low data rate optimization, mandated for SF11/SF12 at 125 kHz.
    pub fn low_data_rate_optimize(&self) -> bool {
        self.sf >= 11 && self.bw_hz <= 125_000
    }

    pub fn symbol_time<T: Scalar>(&self) -> T {
        T::lit((1u64 << self.sf) as f64) / T::lit(self.bw_hz as f64)
    }
}

/// Time on air in seconds of a `payload_len`-byte PHYPayload.
pub fn airtime<T: Scalar>(p: &LoraTxParams, payload_len: usize) -> T {
    debug_assert!(payload_len <= 255);
    let t_sym: T = p.symbol_time();
    let sf = T::lit(p.sf as f64);
    let de = if p.low_data_rate_optimize() { T::one() } else { T::zero() };
    let crc = if p.crc_on { T::one() } else { T::zero() };
    let ih = if p.explicit_header { T::zero() } else { T::one() };
    let pl = T::lit(payload_len as f64);
    let num = T::lit(8.0) * pl - T::lit(4.0) * sf + T::lit(28.0) + T::lit(16.0) * crc - T::lit(20.0) * ih;
    let den = T::lit(4.0) * (sf - T::lit(2.0) * de);
    let blocks = (num / den).ceil() * T::lit(p.cr as f64 + 4.0);
    let n_payload = T::lit(8.0) + blocks.max(T::zero());
    let preamble = T::lit(p.preamble_symbols as f64) + T::lit(4.25);
    (preamble + n_payload) * t_sym
}

pub fn airtime_duration(p: &LoraTxParams, payload_len: usize) -> SimDuration {
    SimDuration::from_secs_f64(airtime::<f64>(p, payload_len))
}

use super::airtime::{airtime_duration, LoraTxParams};
use super::propagation::{LogDistance, Position};
use crate::scalar::Scalar;
use crate::time::{SimDuration, SimTime};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionEvent {
    pub id: u64,
    pub tx_node: usize,
    pub params: LoraTxParams,
    pub start: SimTime,
    pub duration: SimDuration,
    pub payload_len: usize,
    pub position: Position,
}

impl TransmissionEvent {
    pub fn new(id: u64, tx_node: usize, params: LoraTxParams, start: SimTime, payload_len: usize, position: Position) -> Self {
        TransmissionEvent {
            id,
            tx_node,
            params,
            start,
            duration: airtime_duration(&params, payload_len),
            payload_len,
            position,
        }
    }

    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }

    pub fn overlaps(&self, other: &TransmissionEvent) -> bool {
        self.start < other.end() && other.start < self.end()
    }

    /// Same channel and SF, so the two can collide.
    pub fn interferes_with(&self, other: &TransmissionEvent) -> bool {
        self.id != other.id
            && self.params.channel == other.params.channel
            && self.params.sf == other.params.sf
            && self.overlaps(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossReason {
    BelowSensitivity,
    Collision,
    /// Receiver was transmitting.
    HalfDuplex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reception<T> {
    Received { rssi_dbm: T, snr_db: T },
    Lost(LossReason),
}

impl<T> Reception<T> {
    pub fn is_received(&self) -> bool {
        matches!(self, Reception::Received { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioModel<T> {
    pub bw_hz: T,
    pub noise_figure_db: T,
    pub capture_db: T,
    pub path_loss: LogDistance<T>,
}

impl<T: Scalar> RadioModel<T> {
    pub const ANCHOR_TX_DBM: f64 = 14.0;
    pub const ANCHOR_RANGE_M: f64 = 3000.0;

    /// Demodulation floor for each SF, 2.5 dB apart.
    pub fn required_snr_db(sf: u8) -> T {
        assert!((7..=12).contains(&sf));
        T::lit(-7.5 - 2.5 * (sf as f64 - 7.0))
    }

    /// 125 kHz, NF 6 dB, 6 dB capture, path loss calibrated so SF12 at
    /// 14 dBm reaches 3 km.
    pub fn calibrated_default() -> Self {
        Self::calibrated(T::lit(LogDistance::<T>::DEFAULT_EXPONENT), T::lit(LogDistance::<T>::DEFAULT_D0_M), T::lit(6.0))
    }

    pub fn calibrated(exponent: T, d0_m: T, noise_figure_db: T) -> Self {
        let bw_hz = T::lit(125_000.0);
        let sens = Self::noise_floor_for(bw_hz, noise_figure_db) + Self::required_snr_db(12);
        let budget = T::lit(Self::ANCHOR_TX_DBM) - sens;
        let model = RadioModel {
            bw_hz,
            noise_figure_db,
            capture_db: T::lit(6.0),
            path_loss: LogDistance::calibrated(exponent, d0_m, budget, T::lit(Self::ANCHOR_RANGE_M)),
        };
        model.assert_calibrated();
        model
    }

    fn noise_floor_for(bw_hz: T, nf: T) -> T {
        T::lit(-174.0) + T::lit(10.0) * bw_hz.log10() + nf
    }

    pub fn noise_floor_dbm(&self) -> T {
        Self::noise_floor_for(self.bw_hz, self.noise_figure_db)
    }

    pub fn sensitivity_dbm(&self, sf: u8) -> T {
        self.noise_floor_dbm() + Self::required_snr_db(sf)
    }

    pub fn rssi_dbm(&self, tx_power_dbm: i8, distance_m: T) -> T {
        T::lit(tx_power_dbm as f64) - self.path_loss.loss_db(distance_m)
    }

    pub fn max_range_m(&self, sf: u8, tx_power_dbm: i8) -> T {
        self.path_loss.max_range(T::lit(tx_power_dbm as f64) - self.sensitivity_dbm(sf))
    }

    pub fn link_closes(&self, sf: u8, tx_power_dbm: i8, distance_m: T) -> bool {
        self.rssi_dbm(tx_power_dbm, distance_m) >= self.sensitivity_dbm(sf)
    }

    /// Panics unless the SF12 / 14 dBm range lies within 2.7 to 3.3 km.
    pub fn assert_calibrated(&self) {
        let r = self.max_range_m(12, Self::ANCHOR_TX_DBM as i8).to_f64_lossy();
        assert!((2700.0..=3300.0).contains(&r), "SF12 range {r:.0} m outside calibration window");
    }

    /// Outcome of `tx` at a receiver located at `rx`, given every other
    /// transmission on air. Uses deterministic path loss.
    pub fn try_receive(&self, tx: &TransmissionEvent, rx: Position, concurrent: &[TransmissionEvent]) -> Reception<T> {
        let rssi = self.rssi_dbm(tx.params.tx_power_dbm, T::lit(tx.position.distance(&rx)));
        let interferers: Vec<T> = concurrent
            .iter()
            .filter(|o| tx.interferes_with(o))
            .map(|o| self.rssi_dbm(o.params.tx_power_dbm, T::lit(o.position.distance(&rx))))
            .collect();
        self.outcome(tx.params.sf, rssi, &interferers)
    }

    /// Decides reception from the wanted signal's RSSI and the RSSIs of
    /// co-SF co-channel overlapping interferers.
    pub fn outcome(&self, sf: u8, rssi_dbm: T, interferer_rssi_dbm: &[T]) -> Reception<T> {
        if rssi_dbm < self.sensitivity_dbm(sf) {
            return Reception::Lost(LossReason::BelowSensitivity);
        }
        if !interferer_rssi_dbm.is_empty() {
            let ten = T::lit(10.0);
            let sum_mw = interferer_rssi_dbm.iter().fold(T::zero(), |acc, &p| acc + ten.powf(p / ten));
            let interference_dbm = ten * sum_mw.log10();
            if rssi_dbm - interference_dbm < self.capture_db {
                return Reception::Lost(LossReason::Collision);
            }
        }
        Reception::Received { rssi_dbm, snr_db: rssi_dbm - self.noise_floor_dbm() }
    }
}

//! Scenario description and the radio/energy configuration it carries.

use crate::channel::{DutyCyclePolicy, LogDistance, Position, RadioModel};
use crate::codec::TransmissionProfile;
use crate::EnergyModel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lima,
    #[serde(alias = "baseline")]
    LorawanBaseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lima => "lima",
            Mode::LorawanBaseline => "baseline",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lima" => Ok(Mode::Lima),
            "baseline" | "lorawan_baseline" => Ok(Mode::LorawanBaseline),
            other => Err(format!("unknown mode `{other}` (expected lima or baseline)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("ED count {0} outside the supported range 1..=100")]
    OutOfRange(usize),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("LR mesh is disconnected at the standard profile: {unreachable} of {total} LRs unreachable from the LG")]
    DisconnectedMesh { unreachable: usize, total: usize },
}

/// Grid side of the LR deployment for a given ED count.
///
/// Counts that fall between bands snap to the nearest band edge; ties
/// go to the larger deployment.
pub fn lr_count_for(ed_count: usize) -> Result<usize, ScenarioError> {
    const BANDS: [(usize, usize, usize); 5] =
        [(4, 4, 1), (6, 16, 4), (20, 36, 9), (42, 64, 16), (72, 100, 25)];
    if !(1..=100).contains(&ed_count) {
        return Err(ScenarioError::OutOfRange(ed_count));
    }
    if ed_count <= 4 {
        return Ok(1);
    }
    let mut best = (usize::MAX, 0);
    for &(lo, hi, lrs) in &BANDS {
        if (lo..=hi).contains(&ed_count) {
            return Ok(lrs);
        }
        let dist = if ed_count < lo { lo - ed_count } else { ed_count - hi };
        if dist <= best.0 {
            best = (dist, lrs);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossConfig {
    pub exponent: f64,
    pub d0_m: f64,
    /// Derived from the range anchor when absent.
    pub pl0_db: Option<f64>,
    pub shadowing_sigma_db: Option<f64>,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        PathLossConfig {
            exponent: LogDistance::<f64>::DEFAULT_EXPONENT,
            d0_m: LogDistance::<f64>::DEFAULT_D0_M,
            pl0_db: None,
            shadowing_sigma_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub noise_figure_db: f64,
    pub capture_db: f64,
    pub path_loss: PathLossConfig,
    pub ed_duty_cycle: DutyCyclePolicy,
    pub infra_duty_cycle: DutyCyclePolicy,
    pub voltage: f64,
    pub rx_ma: f64,
    pub sleep_ma: f64,
    pub tx_table: Vec<(i8, f64)>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        let energy = EnergyModel::default();
        let base = RadioModel::calibrated_default();
        RadioConfig {
            noise_figure_db: base.noise_figure_db,
            capture_db: base.capture_db,
            path_loss: PathLossConfig::default(),
            ed_duty_cycle: DutyCyclePolicy::default(),
            infra_duty_cycle: DutyCyclePolicy::Budget {
                fraction: 0.1,
                per_channel: Default::default(),
            },
            voltage: energy.voltage,
            rx_ma: energy.rx_ma,
            sleep_ma: energy.sleep_ma,
            tx_table: energy.tx_table,
        }
    }
}

impl RadioConfig {
    /// Builds the propagation model; an explicit PL0 must still keep the
    /// SF12 anchor range within the calibration window.
    pub fn radio_model(&self) -> Result<RadioModel<f64>, ScenarioError> {
        if !(self.path_loss.exponent > 0.0 && self.path_loss.d0_m > 0.0) {
            return Err(ScenarioError::Invalid("path loss exponent and d0 must be positive".into()));
        }
        let mut model = RadioModel::calibrated(
            self.path_loss.exponent,
            self.path_loss.d0_m,
            self.noise_figure_db,
        );
        if let Some(pl0) = self.path_loss.pl0_db {
            model.path_loss.pl0_db = pl0;
        }
        model.path_loss.shadowing_sigma_db = self.path_loss.shadowing_sigma_db;
        model.capture_db = self.capture_db;
        let range = model.max_range_m(12, RadioModel::<f64>::ANCHOR_TX_DBM as i8);
        if !(2700.0..=3300.0).contains(&range) {
            return Err(ScenarioError::Invalid(format!("SF12 range {range:.0} m outside the 2.7-3.3 km calibration window")));
        }
        Ok(model)
    }

    pub fn energy_model(&self) -> EnergyModel {
        EnergyModel {
            voltage: self.voltage,
            rx_ma: self.rx_ma,
            sleep_ma: self.sleep_ma,
            tx_table: self.tx_table.clone(),
        }
    }
}

/// End-device behaviour knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceConfig {
    pub initial_sf: u8,
    pub initial_power_dbm: i8,
    pub min_power_dbm: i8,
    pub max_power_dbm: i8,
    pub adr_ack_limit: u32,
    pub adr_ack_delay: u32,
    pub history_depth: usize,
    pub device_margin_db: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            initial_sf: 12,
            initial_power_dbm: 14,
            min_power_dbm: 2,
            max_power_dbm: 14,
            adr_ack_limit: 64,
            adr_ack_delay: 32,
            history_depth: crate::adr::DEFAULT_HISTORY_DEPTH,
            device_margin_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub area_side_km: f64,
    pub ed_density_per_km2: f64,
    pub traffic_period_s: f64,
    pub sim_hours: f64,
    pub packet_app_bytes: usize,
    pub n_lg: usize,
    pub seed: u64,
    pub mode: Mode,
    pub adr_enabled: bool,
    pub dnof_enabled: bool,
    pub der_enabled: bool,
    /// ED traffic starts after this long so the first REM flood settles.
    pub warmup_s: f64,
    pub rem_period_s: f64,
    pub stp_sf: u8,
    pub stp_power_dbm: i8,
    pub radio: RadioConfig,
    pub device: DeviceConfig,
    /// Explicit node placement; replaces the generated grid when present.
    pub layout: Option<Layout>,
    pub lr_outages: Vec<LrOutage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub lgs: Vec<Position>,
    pub lrs: Vec<Position>,
    pub eds: Vec<Position>,
}

/// Powers an LR off for the rest of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrOutage {
    pub lr: usize,
    pub at_s: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            area_side_km: 6.0,
            ed_density_per_km2: 1.0,
            traffic_period_s: 1800.0,
            sim_hours: 20.0,
            packet_app_bytes: 40,
            n_lg: 1,
            seed: 1,
            mode: Mode::Lima,
            adr_enabled: true,
            dnof_enabled: true,
            der_enabled: true,
            warmup_s: 60.0,
            rem_period_s: 600.0,
            stp_sf: 7,
            stp_power_dbm: 24,
            radio: RadioConfig::default(),
            device: DeviceConfig::default(),
            layout: None,
            lr_outages: Vec::new(),
        }
    }
}

impl Scenario {
    pub const FULL_SCALE_SIM_HOURS: f64 = 200.0;

    pub fn ed_count(&self) -> usize {
        if let Some(layout) = &self.layout {
            return layout.eds.len();
        }
        (self.ed_density_per_km2 * self.area_side_km * self.area_side_km).round() as usize
    }

    /// LRs deployed; zero in baseline mode.
    pub fn lr_count(&self) -> Result<usize, ScenarioError> {
        match self.mode {
            Mode::LorawanBaseline => Ok(0),
            Mode::Lima => match &self.layout {
                Some(layout) => Ok(layout.lrs.len()),
                None => lr_count_for(self.ed_count().max(1)),
            },
        }
    }

    pub fn stp(&self) -> TransmissionProfile {
        TransmissionProfile::new(self.stp_sf, self.stp_power_dbm)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if !(self.area_side_km > 0.0 && self.area_side_km.is_finite()) {
            return bad("area_side_km must be positive");
        }
        if !(self.ed_density_per_km2 >= 0.0 && self.ed_density_per_km2.is_finite()) {
            return bad("ed_density_per_km2 must be non-negative");
        }
        if !(self.traffic_period_s > 0.0 && self.traffic_period_s.is_finite()) {
            return bad("traffic_period_s must be positive");
        }
        if !(self.sim_hours > 0.0 && self.sim_hours.is_finite()) {
            return bad("sim_hours must be positive");
        }
        if self.n_lg == 0 {
            return bad("n_lg must be at least 1");
        }
        if !(7..=12).contains(&self.stp_sf) || !(7..=12).contains(&self.device.initial_sf) {
            return bad("spreading factors must lie in 7..=12");
        }
        if self.device.min_power_dbm > self.device.max_power_dbm {
            return bad("device min_power_dbm exceeds max_power_dbm");
        }
        if self.device.history_depth == 0 {
            return bad("device history_depth must be at least 1");
        }
        if self.packet_app_bytes > 222 {
            return bad("packet_app_bytes exceeds the largest LoRaWAN payload");
        }
        self.radio.radio_model()?;
        if let Some(layout) = &self.layout {
            if layout.lgs.is_empty() {
                return bad("layout needs at least one LG");
            }
            if self.lr_outages.iter().any(|o| o.lr >= layout.lrs.len()) {
                return bad("lr_outages references a missing LR");
            }
            return Ok(());
        }
        if self.ed_count() > 100 {
            return Err(ScenarioError::OutOfRange(self.ed_count()));
        }
        Ok(())
    }
}

//! Discrete-event simulation of LIMA and plain LoRaWAN deployments.

mod ed;
mod engine;
mod events;
mod metrics;
mod ns;
mod scenario;
mod sweep;
mod topology;

pub use ed::{EndDevice, RxSlot};
pub use engine::{ed_addr, lg_id, lr_id, run, Simulation};
pub use events::EventQueue;
pub use metrics::{write_csv, EdFinal, Metrics, MetricsRow, CSV_HEADER};
pub use ns::{NetworkServer, NsDownlink, NsOutcome};
pub use scenario::{lr_count_for, DeviceConfig, Layout, LrOutage, Mode, PathLossConfig, RadioConfig, Scenario, ScenarioError};
pub use sweep::{sweep_variable_size, sweep_variable_traffic, SIZE_SWEEP_KM, TRAFFIC_SWEEP_S};
pub use topology::{lr_grid, Topology, MIN_LR_SPACING_M};

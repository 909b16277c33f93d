//! LoRa PHY abstraction used by the simulator.
//!
//! Everything here is a pure function of its inputs. Reception follows a
//! simple model: RSSI from log-distance path loss, a per-SF sensitivity
//! floor, and co-channel co-SF capture with a fixed margin. Different SFs
//! are treated as orthogonal.

mod airtime;
mod duty;
mod energy;
mod propagation;
mod reception;

pub use airtime::{airtime, airtime_duration, LoraTxParams};
pub use duty::{DutyCycle, DutyCyclePolicy, DutyDecision};
pub use energy::{EnergyLedger, EnergyModel, RadioPhase};
pub use propagation::{LogDistance, Position};
pub use reception::{LossReason, RadioModel, Reception, TransmissionEvent};

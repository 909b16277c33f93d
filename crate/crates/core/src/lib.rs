//! Mesh augmentation for LoRaWAN.
//!
//! This crate contains two things: a sans-IO protocol engine for LIMA routers
//! (LR) and gateways (LG) that tunnel unmodified LoRaWAN frames over a
//! multi-hop LoRa mesh, and a deterministic discrete-event LoRa network
//! simulator that compares a LIMA deployment against plain single-hop
//! LoRaWAN.
//!
//! Module map:
//!
//! * [`codec`]: LIMA header layout, minimal LoRaWAN frame parsing, payload caps.
//! * [`routing`]: REM-built uplink routes and reverse-path downlink routes.
//! * [`forwarding`]: DER election, tunneling, dedup, DNoF, RX-window delivery.
//! * [`adr`]: tunneled adaptive data rate (SNR history and NS-side algorithm).
//! * [`channel`]: airtime, path loss, reception, duty cycle and energy.
//! * [`simulator`]: event engine, topology, node models and metrics.
//! * [`cli`]: the `lima` command line front end.
//!
//! The radio math in [`channel`] is generic over the floating point type; the
//! aliases below fix it to `f64`, which is what the simulator uses.

pub mod adr;
pub mod channel;
pub mod cli;
pub mod codec;
pub mod forwarding;
pub mod routing;
pub mod scalar;
pub mod simulator;
pub mod time;

pub use scalar::Scalar;
pub use time::{SimDuration, SimTime};

/// Path loss model used by the simulator.
pub type PathLoss = channel::LogDistance<f64>;
/// Reception model used by the simulator.
pub type RadioModel = channel::RadioModel<f64>;
pub type EnergyModel = channel::EnergyModel<f64>;
pub type EnergyLedger = channel::EnergyLedger<f64>;

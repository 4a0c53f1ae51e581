//! Simulation, calibration and benchmarking of tunable-coupler CZ and iSWAP gates.

pub mod calibration;
pub mod chevron;
pub mod device;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod pulse;
pub mod qutrit;
pub mod rb;
pub mod scenario;
pub mod system;

pub use error::{Error, Result};

//! Simulation and analysis of a single atom coupled to a lossy one-sided
//! nanophotonic cavity inside a polarization interferometer.
//!
//! All rates are angular frequencies in rad/μs and all times are in μs; see
//! [`params::units`] for conversions.

pub mod disorder;
pub mod error;
pub mod fitkit;
pub mod lindblad;
pub mod linres;
pub mod params;
pub mod saturation;
pub mod switch;
pub mod trace;

pub use error::{Error, Result};
pub use params::{
    derive_rates, units, ComplexRates, InterferometerConfig, ParamsConfig, SystemParams,
};
pub use trace::TraceSeries;

//! Multisensor CUSUM-type sequential change detection.
//!
//! - [`model`]: sensor models, log-likelihood-ratio increments, sample paths.
//! - [`detectors`]: oracle, GLR and mixture CUSUM rules, scalable rules.
//! - [`windows`]: adaptive windows that make `max_s` statistics finite-memory.
//! - [`renewal`]: Gaussian renewal constants and multichart threshold design.
//! - [`montecarlo`]: seeded parallel estimation of ARL and detection delay, calibration.

pub mod detectors;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod renewal;
pub mod windows;

pub use error::{Error, Result};

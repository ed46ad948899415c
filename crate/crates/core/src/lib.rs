//! Lower confidence limits for the reliability of coherent systems from
//! component lifetime data.

pub mod bootstrap;
pub mod censoring;
pub mod cli;
pub mod distributions;
pub mod estimators;
pub mod error;
pub mod numeric;
pub mod resampling;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod structures;

pub use error::{Error, Result};

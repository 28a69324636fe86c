//! Parametric fetal phonocardiogram simulation, analysis and calibration.

pub mod analysis;
pub mod api;
pub mod calibration;
pub mod config;
pub mod dsp;
pub mod error;
pub mod heart;
pub mod io;
pub mod kernel;
pub mod noise;
pub mod sampler;
pub mod seed;
pub mod signal;
pub mod simulate;
pub mod transmission;

pub use error::{Error, Result};
pub use signal::Signal;

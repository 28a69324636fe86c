//! Signal-processing primitives shared by synthesis and analysis.

pub mod fft;
pub mod filter;
pub mod resample;
pub mod welch;

pub use fft::{analytic_magnitude, autocorrelation, direct_convolve, fft_convolve};
pub use filter::{butter_bandpass, butter_lowpass, sosfilt, sosfiltfilt, Sos};
pub use resample::resample;
pub use welch::{welch, WelchEstimate};

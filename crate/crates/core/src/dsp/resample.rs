//! Band-limited sample-rate conversion with a Hann-windowed sinc.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Zero crossings of the sinc kept on each side of the interpolation point.
const HALF_TAPS: f64 = 16.0;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Resample to `fs_out`; the output holds `round(len * fs_out / fs_in)`
/// samples. Downsampling lowers the sinc cutoff to the new Nyquist rate.
pub fn resample(x: &Signal, fs_out: f64) -> Result<Signal> {
    if !(fs_out.is_finite() && fs_out > 0.0) {
        return Err(Error::param("fs", format!("target rate must be > 0, got {fs_out}")));
    }
    if fs_out == x.fs {
        return Ok(x.clone());
    }
    let ratio = fs_out / x.fs;
    let out_len = (x.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0);
    let half = HALF_TAPS / cutoff;
    let n_in = x.len() as isize;
    let samples = (0..out_len)
        .map(|m| {
            let t = m as f64 / ratio;
            let lo = ((t - half).ceil() as isize).max(0);
            let hi = ((t + half).floor() as isize).min(n_in - 1);
            let mut acc = 0.0;
            for n in lo..=hi {
                let d = t - n as f64;
                let w = 0.5 * (1.0 + (PI * d / half).cos());
                acc += x.samples[n as usize] * cutoff * sinc(cutoff * d) * w;
            }
            acc
        })
        .collect();
    Signal::new(samples, fs_out)
}

//! Abdominal transmission: a normalized cascade of two causal exponential
//! kernels applied to the summed cardiac sources by convolution.

use serde::{Deserialize, Serialize};

use crate::dsp::fft::{direct_convolve, fft_convolve};
use crate::error::{Error, Result};
use crate::signal::Signal;

/// Inputs longer than this are convolved through FFTs.
pub const DIRECT_CONVOLUTION_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfig {
    pub a1: f64,
    /// Decay rate of the first kernel, 1/s.
    pub beta1: f64,
    /// Path length of the first layer, m.
    pub r1: f64,
    /// Propagation speed in the first layer, m/s.
    pub c1: f64,
    pub a2: f64,
    pub beta2: f64,
    pub r2: f64,
    pub c2: f64,
    /// Shift each kernel by its travel time `r/c`.
    pub use_delays: bool,
}

impl Default for TransmissionConfig {
    fn default() -> Self {
        Self {
            a1: 1.0,
            beta1: 100.0,
            r1: 0.01,
            c1: 1500.0,
            a2: 0.8,
            beta2: 300.0,
            r2: 0.03,
            c2: 1540.0,
            use_delays: true,
        }
    }
}

impl TransmissionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("A1", self.a1),
            ("beta1", self.beta1),
            ("c1", self.c1),
            ("A2", self.a2),
            ("beta2", self.beta2),
            ("c2", self.c2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("r1", self.r1), ("r2", self.r2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn delays(&self) -> (f64, f64) {
        if self.use_delays {
            (self.r1 / self.c1, self.r2 / self.c2)
        } else {
            (0.0, 0.0)
        }
    }

    /// Truncation horizon of the cascade, seconds.
    pub fn horizon(&self) -> f64 {
        let (d1, d2) = self.delays();
        (8.0 / self.beta1).max(8.0 / self.beta2) + d1 + d2
    }
}

/// `A exp(-beta (t - delay))` for `t >= delay`, zero before. The delay is
/// quantized to `round(delay * fs)` samples; the buffer covers
/// `[0, horizon)`.
pub fn exp_kernel(amplitude: f64, beta: f64, delay: f64, fs: f64, horizon: f64) -> Result<Signal> {
    if !(beta > 0.0 && fs > 0.0 && delay >= 0.0) {
        return Err(Error::param("beta/fs/delay", "beta, fs must be > 0 and delay >= 0"));
    }
    let needed = 8.0 / beta + delay;
    if horizon < needed - 1e-12 {
        return Err(Error::Truncation { horizon, needed });
    }
    let shift = (delay * fs).round() as usize;
    let len = (horizon * fs).round() as usize;
    let samples = (0..len)
        .map(|n| {
            if n < shift {
                0.0
            } else {
                amplitude * (-beta * (n - shift) as f64 / fs).exp()
            }
        })
        .collect();
    Signal::new(samples, fs)
}

/// Discrete cascade `h1 * h2`, divided by `sum(h)/fs` so the filter has
/// unit DC gain.
pub fn cascade_response(cfg: &TransmissionConfig, fs: f64) -> Result<Signal> {
    cfg.validate()?;
    let horizon = cfg.horizon();
    let (d1, d2) = cfg.delays();
    let h1 = exp_kernel(cfg.a1, cfg.beta1, d1, fs, horizon)?;
    let h2 = exp_kernel(cfg.a2, cfg.beta2, d2, fs, horizon)?;
    let mut h = direct_convolve(&h1.samples, &h2.samples);
    h.truncate(h1.len());
    let area: f64 = h.iter().sum::<f64>() / fs;
    if !(area.is_finite() && area > 0.0) {
        return Err(Error::Degenerate(format!(
            "transmission cascade has zero or non-finite area ({area})"
        )));
    }
    for v in &mut h {
        *v /= area;
    }
    Signal::new(h, fs)
}

/// Causal convolution `y[n] = (1/fs) sum_m h[m] x[n-m]`, truncated to the
/// input length.
pub fn propagate(x: &Signal, h: &Signal) -> Result<Signal> {
    if x.fs != h.fs {
        return Err(Error::FsMismatch(x.fs, h.fs));
    }
    let full = if x.len() > DIRECT_CONVOLUTION_LIMIT {
        fft_convolve(&x.samples, &h.samples)
    } else {
        direct_convolve(&x.samples, &h.samples)
    };
    let scale = 1.0 / x.fs;
    let mut y: Vec<f64> = full.into_iter().take(x.len()).map(|v| v * scale).collect();
    y.resize(x.len(), 0.0);
    Signal::new(y, x.fs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_kernel_values() {
        let k = exp_kernel(1.0, 100.0, 0.0, 1000.0, 0.08).unwrap();
        assert!((k.samples[10] - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(k.samples[0], 1.0);
        let shifted = exp_kernel(1.0, 100.0, 0.005, 1000.0, 0.1).unwrap();
        assert!(shifted.samples[..5].iter().all(|v| *v == 0.0));
        assert_eq!(shifted.samples[5], 1.0);
    }

    #[test]
    fn short_horizon_flagged() {
        assert!(matches!(
            exp_kernel(1.0, 100.0, 0.0, 1000.0, 0.05),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn default_delays_quantize_to_zero() {
        let cfg = TransmissionConfig::default();
        let (d1, d2) = cfg.delays();
        assert!((d1 - 0.01 / 1500.0).abs() < 1e-15);
        assert_eq!((d1 * 1000.0).round(), 0.0);
        assert_eq!((d2 * 1000.0).round(), 0.0);
    }

    #[test]
    fn unit_area_and_gain_independence() {
        let cfg = TransmissionConfig::default();
        let h = cascade_response(&cfg, 1000.0).unwrap();
        assert!((h.samples.iter().sum::<f64>() / 1000.0 - 1.0).abs() < 1e-12);
        let louder = TransmissionConfig { a1: 3.7, ..cfg };
        let g = cascade_response(&louder, 1000.0).unwrap();
        for (a, b) in h.samples.iter().zip(&g.samples) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn impulse_response_is_identity() {
        let h = Signal::new(vec![1000.0], 1000.0).unwrap();
        let x = Signal::new(vec![0.3, -1.0, 2.0, 0.5], 1000.0).unwrap();
        let y = propagate(&x, &h).unwrap();
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fs_mismatch() {
        let h = Signal::new(vec![1.0], 500.0).unwrap();
        let x = Signal::new(vec![1.0], 1000.0).unwrap();
        assert!(matches!(propagate(&x, &h), Err(Error::FsMismatch(..))));
    }
}

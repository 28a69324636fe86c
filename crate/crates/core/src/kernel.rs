//! Asymmetric damped-sinusoid event kernel.
//!
//! One heart-sound event is a sinusoidal carrier under an envelope with a
//! linear attack of length `Ta` followed by an exponential decay with time
//! constant `tau`. Everything here is a pure function of its arguments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Default attack time shared by all events, in seconds.
pub const DEFAULT_ATTACK: f64 = 0.008;

/// Default truncation horizon in decay constants after the attack.
pub const DEFAULT_DECAY_CONSTANTS: f64 = 8.0;

/// Parameters of a single sound event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventParams {
    pub amplitude: f64,
    pub f0: f64,
    pub attack: f64,
    pub tau: f64,
}

impl EventParams {
    pub fn new(amplitude: f64, f0: f64, attack: f64, tau: f64) -> Result<Self> {
        let p = Self {
            amplitude,
            f0,
            attack,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("amplitude", self.amplitude)?;
        positive("f0", self.f0)?;
        positive("attack", self.attack)?;
        positive("tau", self.tau)?;
        Ok(())
    }

    /// Rendered duration: attack plus `decay_constants` time constants.
    pub fn duration(&self, decay_constants: f64) -> f64 {
        self.attack + decay_constants * self.tau
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

/// Attack/decay envelope: `t/Ta` on `[0, Ta)`, `exp(-(t-Ta)/tau)` afterwards,
/// zero before the onset.
pub fn envelope(t: f64, attack: f64, tau: f64) -> Result<f64> {
    positive("attack", attack)?;
    positive("tau", tau)?;
    Ok(envelope_unchecked(t, attack, tau))
}

#[inline]
pub(crate) fn envelope_unchecked(t: f64, attack: f64, tau: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else if t < attack {
        t / attack
    } else {
        (-(t - attack) / tau).exp()
    }
}

/// `A sin(2 pi f0 t) a(t; Ta, tau)`.
pub fn kernel(t: f64, p: &EventParams) -> Result<f64> {
    p.validate()?;
    Ok(kernel_unchecked(t, p.amplitude, p.f0, p.attack, p.tau))
}

#[inline]
pub(crate) fn kernel_unchecked(t: f64, amplitude: f64, f0: f64, attack: f64, tau: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    amplitude * (2.0 * PI * f0 * t).sin() * envelope_unchecked(t, attack, tau)
}

/// Render one event at `t = n/fs`, `n = 0, 1, ...`, over `[0, Ta + 8 tau)`.
pub fn render_event(p: &EventParams, fs: f64) -> Result<Signal> {
    render_event_with_horizon(p, fs, DEFAULT_DECAY_CONSTANTS)
}

/// As [`render_event`] with a custom horizon of `decay_constants` time
/// constants; the buffer has `round((Ta + k tau) fs)` samples.
pub fn render_event_with_horizon(p: &EventParams, fs: f64, decay_constants: f64) -> Result<Signal> {
    p.validate()?;
    positive("fs", fs)?;
    positive("decay_constants", decay_constants)?;
    check_nyquist(p.f0, fs)?;
    let len = (p.duration(decay_constants) * fs).round() as usize;
    let samples = (0..len)
        .map(|n| kernel_unchecked(n as f64 / fs, p.amplitude, p.f0, p.attack, p.tau))
        .collect();
    Signal::new(samples, fs)
}

pub(crate) fn check_nyquist(f0: f64, fs: f64) -> Result<()> {
    if fs < 4.0 * f0 {
        Err(Error::Aliasing { f0, fs })
    } else {
        Ok(())
    }
}

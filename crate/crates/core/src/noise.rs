//! Background noise and artifacts: AR(1) colored noise with an optional slow
//! gain envelope, RMS-based SNR mixing, fetal-movement bursts and uterine
//! contraction tracks.
//!
//! The movement and contraction generators are deliberately simple shapes
//! that expose every configurable knob: movements are Poisson-timed
//! band-limited noise bursts under a raised-cosine window (plus an optional
//! low-frequency "thump"), contractions are Poisson-timed trapezoids that
//! both attenuate the cardiac component and gate a band-limited noise
//! track. Generator outputs are unit-referenced; the caller scales them.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::fft::brickwall;
use crate::error::{Error, Result};
use crate::kernel;
use crate::seed::{self, SimRng};
use crate::signal::{rms, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// AR(1) coefficient.
    pub rho: f64,
    /// Depth of the slow gain modulation.
    pub gamma: f64,
    /// Cutoff of the low-pass applied to the modulation noise, Hz.
    pub lp_cutoff: f64,
    /// Target cardiac-to-noise ratio in dB; `+inf` disables the noise.
    pub snr_db: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            gamma: 0.3,
            lp_cutoff: 0.5,
            snr_db: 10.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::param("rho", "AR(1) requires |rho| < 1"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("gamma", "must be >= 0"));
        }
        if !(self.lp_cutoff > 0.0 && self.lp_cutoff < fs / 2.0) {
            return Err(Error::param("lp_cutoff", format!("must lie in (0, {}) Hz", fs / 2.0)));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::param("snr_db", "must be a number or +inf"));
        }
        Ok(())
    }
}

/// Stationary AR(1): `n_t = rho n_{t-1} + sqrt(1 - rho^2) e_t` with
/// `n_0 ~ N(0, 1)`.
pub fn ar1_noise(rho: f64, n: usize, fs: f64, seed: u64) -> Result<Signal> {
    if !(rho.abs() < 1.0) {
        return Err(Error::param("rho", format!("|rho| must be < 1 for a stable AR(1), got {rho}")));
    }
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    let mut rng = seed::rng(seed);
    let innov = (1.0 - rho * rho).sqrt();
    let mut prev: f64 = rng.sample(StandardNormal);
    let mut out = Vec::with_capacity(n);
    out.push(prev);
    for _ in 1..n {
        let e: f64 = rng.sample(StandardNormal);
        prev = rho * prev + innov * e;
        out.push(prev);
    }
    Signal::new(out, fs)
}

/// Slow gain envelope `g = 1 + gamma LP{w}` where `w` is white noise
/// band-limited to `(0, lp_cutoff]` Hz and scaled to unit variance.
pub fn gain_envelope(len: usize, fs: f64, gamma: f64, lp_cutoff: f64, seed: u64) -> Result<Vec<f64>> {
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "must be >= 0"));
    }
    if gamma == 0.0 {
        return Ok(vec![1.0; len]);
    }
    if !(lp_cutoff > 0.0 && lp_cutoff < fs / 2.0) {
        return Err(Error::param("lp_cutoff", format!("must lie in (0, {}) Hz", fs / 2.0)));
    }
    let mut rng = seed::rng(seed);
    let w: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let lp = brickwall(&w, fs, f64::MIN_POSITIVE, lp_cutoff);
    let sd = rms(&lp);
    Ok(if sd > 0.0 {
        lp.iter().map(|v| 1.0 + gamma * v / sd).collect()
    } else {
        vec![1.0; len]
    })
}

/// Multiply `noise` by a slow gain envelope (see [`gain_envelope`]).
pub fn gain_modulate(noise: &Signal, gamma: f64, lp_cutoff: f64, seed: u64) -> Result<Signal> {
    let g = gain_envelope(noise.len(), noise.fs, gamma, lp_cutoff, seed)?;
    Signal::new(
        noise.samples.iter().zip(&g).map(|(n, g)| n * g).collect(),
        noise.fs,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrMix {
    pub mixture: Signal,
    /// `sigma_n * n~`, the noise actually added.
    pub scaled_noise: Signal,
    pub sigma_n: f64,
}

/// `x = x_c + sigma_n n~` with `n~` rescaled to unit RMS and
/// `sigma_n = RMS(x_c) / 10^(snr/20)`.
pub fn mix_with_snr(x_c: &Signal, noise: &Signal, snr_db: f64) -> Result<SnrMix> {
    x_c.check_compatible(noise)?;
    let signal_rms = x_c.rms();
    if !(signal_rms > 0.0) {
        return Err(Error::SnrUndefined);
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::param("snr_db", "must be a number or +inf"));
    }
    let sigma_n = signal_rms / 10f64.powf(snr_db / 20.0);
    let noise_rms = noise.rms();
    let scaled = if sigma_n == 0.0 {
        Signal::zeros(noise.len(), noise.fs)
    } else {
        if !(noise_rms > 0.0) {
            return Err(Error::param("noise", "noise has zero RMS"));
        }
        noise.scaled(sigma_n / noise_rms)
    };
    Ok(SnrMix {
        mixture: x_c.add(&scaled)?,
        scaled_noise: scaled,
        sigma_n,
    })
}

/// Realized SNR in dB of `signal` against `noise`.
pub fn realized_snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    20.0 * (rms(signal) / rms(noise)).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementConfig {
    pub enabled: bool,
    pub intensity: f64,
    pub rate_per_min: f64,
    pub duration_range: (f64, f64),
    pub band: (f64, f64),
    pub thump_prob: f64,
}

impl Default for MovementConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            intensity: 1.3,
            rate_per_min: 8.0,
            duration_range: (0.12, 0.45),
            band: (15.0, 200.0),
            thump_prob: 0.35,
        }
    }
}

impl MovementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.rate_per_min >= 0.0) {
            return Err(Error::param("movement", "intensity and rate must be >= 0"));
        }
        check_range("movement_duration_range", self.duration_range, 0.0)?;
        check_range("movement_band", self.band, 0.0)?;
        if !(0.0..=1.0).contains(&self.thump_prob) {
            return Err(Error::param("movement_thump_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UterineConfig {
    pub enabled: bool,
    pub rate_per_10min: f64,
    pub duration_range: (f64, f64),
    pub rise_fall_frac: (f64, f64),
    /// Fraction of the cardiac amplitude removed at the plateau.
    pub attenuation: f64,
    pub noise_band: (f64, f64),
    pub noise_intensity: f64,
}

impl Default for UterineConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            rate_per_10min: 4.0,
            duration_range: (10.0, 25.0),
            rise_fall_frac: (0.35, 0.35),
            attenuation: 0.45,
            noise_band: (0.5, 18.0),
            noise_intensity: 0.8,
        }
    }
}

impl UterineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_per_10min >= 0.0 && self.noise_intensity >= 0.0) {
            return Err(Error::param("uc", "rate and noise intensity must be >= 0"));
        }
        check_range("uc_duration_range", self.duration_range, 0.0)?;
        check_range("uc_noise_band", self.noise_band, 0.0)?;
        let (rise, fall) = self.rise_fall_frac;
        if !(rise >= 0.0 && fall >= 0.0 && rise + fall <= 1.0) {
            return Err(Error::param("uc_rise_fall_frac", "fractions must be >= 0 and sum to <= 1"));
        }
        if !(0.0..1.0).contains(&self.attenuation) {
            return Err(Error::param("uc_attenuation", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi) {
        return Err(Error::param(name, format!("need {min} <= lo <= hi, got ({lo}, {hi})")));
    }
    Ok(())
}

/// One artifact episode on the output time axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEvent {
    pub start: f64,
    /// Sampled duration; the rendered support is clipped at the record end.
    pub duration: f64,
    /// Movement events only: whether a thump was superimposed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub thump: bool,
}

impl ArtifactEvent {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    fn support(&self, fs: f64, len: usize) -> (usize, usize) {
        let i0 = ((self.start * fs).round() as usize).min(len);
        let i1 = (i0 + (self.duration * fs).round() as usize).min(len);
        (i0, i1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovementTrack {
    pub signal: Signal,
    pub events: Vec<ArtifactEvent>,
}

fn poisson_count(rng: &mut SimRng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as usize).unwrap_or(0)
}

fn event_times(rng: &mut SimRng, lambda: f64, duration: f64, range: (f64, f64)) -> Vec<ArtifactEvent> {
    let count = poisson_count(rng, lambda);
    let mut events: Vec<ArtifactEvent> = (0..count)
        .map(|_| {
            let start = rng.random::<f64>() * duration;
            let d = range.0 + rng.random::<f64>() * (range.1 - range.0);
            ArtifactEvent {
                start,
                duration: d,
                thump: false,
            }
        })
        .collect();
    events.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
    events
}

/// Upper band edges are clamped to `0.45 fs`.
fn clamp_band((lo, hi): (f64, f64), fs: f64) -> (f64, f64) {
    let hi = hi.min(0.45 * fs);
    (lo.min(hi), hi)
}

/// Fetal-movement artifacts at unit reference level times `intensity`.
pub fn movement_artifacts(cfg: &MovementConfig, duration: f64, fs: f64, seed: u64) -> Result<MovementTrack> {
    cfg.validate()?;
    let len = (duration * fs).round() as usize;
    let mut out = vec![0.0; len];
    if !cfg.enabled {
        return Ok(MovementTrack {
            signal: Signal::new(out, fs)?,
            events: Vec::new(),
        });
    }
    let mut rng = seed::rng(seed);
    let mut events = event_times(&mut rng, cfg.rate_per_min * duration / 60.0, duration, cfg.duration_range);
    let (lo, hi) = clamp_band(cfg.band, fs);
    for ev in &mut events {
        let (i0, i1) = ev.support(fs, len);
        let n = i1 - i0;
        // draw the burst noise for the full sampled duration so clipping at
        // the record end does not change later events
        let full = (ev.duration * fs).round() as usize;
        let white: Vec<f64> = (0..full.max(1)).map(|_| rng.sample(StandardNormal)).collect();
        ev.thump = rng.random::<f64>() < cfg.thump_prob;
        let thump_f0 = 3.0 + rng.random::<f64>() * 17.0;
        if n == 0 {
            continue;
        }
        let burst = brickwall(&white, fs, lo, hi);
        let r = rms(&burst);
        let norm = if r > 0.0 { cfg.intensity / r } else { 0.0 };
        let window_len = full.max(2) as f64;
        let attack = (ev.duration / 6.0).min(kernel::DEFAULT_ATTACK * 2.0);
        let tau = ev.duration / 5.0;
        for j in 0..n {
            let w = 0.5 - 0.5 * (2.0 * PI * j as f64 / (window_len - 1.0)).cos();
            let mut v = burst[j] * norm * w;
            if ev.thump {
                let t = j as f64 / fs;
                v += kernel::kernel_unchecked(t, cfg.intensity, thump_f0, attack, tau) * w.sqrt();
            }
            out[i0 + j] += v;
        }
    }
    Ok(MovementTrack {
        signal: Signal::new(out, fs)?,
        events,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UterineTrack {
    /// Fraction of cardiac amplitude removed, in `[0, attenuation]`.
    pub attenuation: Signal,
    /// Band-limited contraction noise gated by the contraction shape,
    /// unit reference level times `noise_intensity`.
    pub noise: Signal,
    pub events: Vec<ArtifactEvent>,
}

/// Uterine-contraction attenuation envelope and gated noise.
pub fn uterine_contraction_track(cfg: &UterineConfig, duration: f64, fs: f64, seed: u64) -> Result<UterineTrack> {
    cfg.validate()?;
    let len = (duration * fs).round() as usize;
    if !cfg.enabled || len == 0 {
        return Ok(UterineTrack {
            attenuation: Signal::zeros(len, fs),
            noise: Signal::zeros(len, fs),
            events: Vec::new(),
        });
    }
    let mut rng = seed::rng(seed);
    let events = event_times(&mut rng, cfg.rate_per_10min * duration / 600.0, duration, cfg.duration_range);
    let mut shape = vec![0.0f64; len];
    for ev in &events {
        let (i0, i1) = ev.support(fs, len);
        let rise = cfg.rise_fall_frac.0 * ev.duration;
        let fall = cfg.rise_fall_frac.1 * ev.duration;
        for (j, s) in shape[i0..i1].iter_mut().enumerate() {
            let t = j as f64 / fs;
            let v = if t < rise {
                t / rise
            } else if t > ev.duration - fall {
                ((ev.duration - t) / fall).max(0.0)
            } else {
                1.0
            };
            *s = s.max(v.min(1.0));
        }
    }
    let attenuation: Vec<f64> = shape.iter().map(|s| s * cfg.attenuation).collect();
    let noise = if events.is_empty() {
        vec![0.0; len]
    } else {
        let white: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let (lo, hi) = clamp_band(cfg.noise_band, fs);
        let band = brickwall(&white, fs, lo, hi);
        let r = rms(&band);
        let norm = if r > 0.0 { cfg.noise_intensity / r } else { 0.0 };
        band.iter().zip(&shape).map(|(b, s)| b * norm * s).collect()
    };
    Ok(UterineTrack {
        attenuation: Signal::new(attenuation, fs)?,
        noise: Signal::new(noise, fs)?,
        events,
    })
}

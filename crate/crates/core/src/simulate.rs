//! End-to-end synthesis: sampled fetal cycles and maternal beats, shared
//! abdominal transmission, contraction damping, and additive noise and
//! artifacts, with every component and the ground truth kept alongside the
//! mixture.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Result, StageExt};
use crate::heart::{self, CycleTheta, RrSeries};
use crate::noise::{self, ArtifactEvent};
use crate::sampler;
use crate::seed::{derive_indexed, derive_seed};
use crate::signal::Signal;
use crate::transmission;

/// Every additive piece of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub fetal_clean: Signal,
    pub maternal_clean: Signal,
    /// `h * (fetal + maternal)` before contraction damping.
    pub cardiac_propagated: Signal,
    /// Fraction of the cardiac amplitude removed by contractions.
    pub uc_envelope: Signal,
    /// `cardiac_propagated * (1 - uc_envelope)`.
    pub cardiac: Signal,
    /// SNR-scaled background noise.
    pub noise: Signal,
    pub movement: Signal,
    pub uc_noise: Signal,
}

impl Components {
    /// Mixture rebuilt from the parts.
    pub fn sum(&self) -> Vec<f64> {
        (0..self.cardiac.len())
            .map(|i| self.cardiac.samples[i] + self.noise.samples[i] + self.movement.samples[i] + self.uc_noise.samples[i])
            .collect()
    }
}

/// Ground truth for downstream benchmarking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub fs: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Sampled per-cycle parameters (before any shared-decay averaging).
    pub thetas: Vec<CycleTheta>,
    pub rr: Vec<f64>,
    /// Fetal S1 onsets, seconds (sample-aligned).
    pub onsets: Vec<f64>,
    /// S2 onset minus S1 onset as rendered, seconds.
    pub delta_t: Vec<f64>,
    pub maternal_onsets: Vec<f64>,
    pub movement_events: Vec<ArtifactEvent>,
    pub uc_events: Vec<ArtifactEvent>,
    /// Noise scale applied to the unit-RMS noise.
    pub sigma_n: f64,
    /// `20 log10(rms(cardiac) / rms(noise))`; absent when noise is off.
    pub realized_snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub mixture: Signal,
    pub components: Components,
    pub annotations: Annotations,
    pub config: SimConfig,
}

/// Synthesize one recording of `cfg.cycles_per_sample` fetal cycles.
pub fn simulate(cfg: &SimConfig, seed: u64) -> Result<Recording> {
    cfg.validate().stage("config")?;
    let fs = cfg.fs;
    let n = cfg.cycles_per_sample;

    let mut thetas = sampler::sample_thetas(&cfg.prior, &cfg.bounds, n, derive_seed(seed, "theta")).stage("sampling")?;
    if cfg.stabilize_delta_t {
        let dts = sampler::bootstrap_delta_t(&cfg.delta_t_bootstrap, n, derive_seed(seed, "delta_t")).stage("sampling")?;
        for (t, dt) in thetas.iter_mut().zip(dts) {
            t.delta_t = dt;
        }
    }
    let rr = heart::make_rr_series(&cfg.rr_mode(), &cfg.hrv(), n, derive_seed(seed, "rr")).stage("rr")?;
    let fetal = heart::render_fetal_train(&thetas, &rr, &cfg.hyper(), fs, cfg.shared_tau).stage("fetal")?;
    let duration = fetal.duration();
    let len = fetal.len();
    let maternal_cfg = cfg.maternal();
    let maternal = heart::render_maternal_train(&maternal_cfg, duration, fs).stage("maternal")?;

    let h = transmission::cascade_response(&cfg.transmission, fs).stage("transmission")?;
    let propagated = transmission::propagate(&fetal.add(&maternal).stage("transmission")?, &h).stage("transmission")?;
    let reference = propagated.rms();

    let uc = noise::uterine_contraction_track(&cfg.uterine, duration, fs, derive_seed(seed, "uterine")).stage("uterine")?;
    let cardiac = Signal::new(
        propagated
            .samples
            .iter()
            .zip(&uc.attenuation.samples)
            .map(|(x, a)| x * (1.0 - a))
            .collect(),
        fs,
    )
    .stage("uterine")?;

    let raw = if cfg.noise.snr_db == f64::INFINITY {
        Signal::zeros(len, fs)
    } else {
        let ar = noise::ar1_noise(cfg.noise.rho, len, fs, derive_seed(seed, "noise")).stage("noise")?;
        noise::gain_modulate(&ar, cfg.noise.gamma, cfg.noise.lp_cutoff, derive_seed(seed, "gain")).stage("noise")?
    };
    let mix = noise::mix_with_snr(&cardiac, &raw, cfg.noise.snr_db).stage("noise")?;

    let movement = noise::movement_artifacts(&cfg.movement, duration, fs, derive_seed(seed, "movement"))
        .stage("movement")?;
    let movement_signal = movement.signal.scaled(reference);
    let uc_noise = uc.noise.scaled(reference);

    let components = Components {
        fetal_clean: fetal,
        maternal_clean: maternal,
        cardiac_propagated: propagated,
        uc_envelope: uc.attenuation,
        cardiac,
        noise: mix.scaled_noise,
        movement: movement_signal,
        uc_noise,
    };
    let mixture = Signal::new(components.sum(), fs).stage("mix")?;

    let onsets: Vec<f64> = rr.onset_samples(fs).iter().map(|o| *o as f64 / fs).collect();
    let delta_t = rendered_delta_t(&thetas, &rr, fs);
    let period = maternal_cfg.period();
    let maternal_period_samples = (period * fs).round();
    let maternal_onsets = (0..)
        .map(|l| l as f64 * maternal_period_samples / fs)
        .take_while(|t| *t < duration)
        .collect();
    let realized_snr_db = (mix.sigma_n > 0.0)
        .then(|| noise::realized_snr_db(&components.cardiac.samples, &components.noise.samples));
    let annotations = Annotations {
        fs,
        n_samples: len,
        seed,
        thetas,
        rr: rr.values.clone(),
        onsets,
        delta_t,
        maternal_onsets,
        movement_events: movement.events,
        uc_events: uc.events,
        sigma_n: mix.sigma_n,
        realized_snr_db,
    };
    Ok(Recording {
        mixture,
        components,
        annotations,
        config: cfg.clone(),
    })
}

/// S1-to-S2 spacing after sample quantization and cycle stretching.
fn rendered_delta_t(thetas: &[CycleTheta], rr: &RrSeries, fs: f64) -> Vec<f64> {
    let nominal = (rr.mean() * fs).round().max(1.0);
    thetas
        .iter()
        .zip(rr.cycle_lengths(fs))
        .map(|(t, len)| {
            let d = (t.delta_t * fs).round() / fs;
            if len == nominal as usize || len == 0 {
                d
            } else {
                d * len as f64 / nominal
            }
        })
        .collect()
}

/// `cfg.num_samples` recordings with per-recording seeds derived from the
/// master seed.
pub fn simulate_batch(cfg: &SimConfig) -> Result<Vec<Recording>> {
    (0..cfg.num_samples as u64)
        .into_par_iter()
        .map(|i| simulate(cfg, derive_indexed(cfg.seed, "recording", i)))
        .collect()
}

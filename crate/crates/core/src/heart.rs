//! Heart-sound sources: RR series, onset times and the fetal/maternal
//! two-event trains.
//!
//! A train is built cycle by cycle. Each cycle is the continuous-time sum of
//! an S1 event at the cycle onset and an S2 event `deltaT` later, evaluated on
//! a nominal grid of `round(mean_rr * fs)` samples. A cycle whose target
//! length `round(rr_k * fs)` differs from the nominal one is time-stretched by
//! evaluating the same waveform on a scaled time axis, so the whole cycle
//! (including the realized S1-S2 spacing) scales by `rr_k / mean_rr`. Event
//! tails that run past the end of their cycle are overlap-added into the
//! following cycles; the output holds exactly `sum_k round(rr_k * fs)`
//! samples.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, DEFAULT_DECAY_CONSTANTS};
use crate::seed;
use crate::signal::Signal;

/// Names of the per-cycle parameters in vector order.
pub const THETA_NAMES: [&str; 5] = ["A_S1", "A_S2", "tau_S1", "tau_S2", "deltaT"];

/// Per-cycle fetal parameter vector `(A_S1, A_S2, tau_S1, tau_S2, deltaT)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTheta {
    pub a_s1: f64,
    pub a_s2: f64,
    pub tau_s1: f64,
    pub tau_s2: f64,
    pub delta_t: f64,
}

impl CycleTheta {
    pub fn new(a_s1: f64, a_s2: f64, tau_s1: f64, tau_s2: f64, delta_t: f64) -> Self {
        Self {
            a_s1,
            a_s2,
            tau_s1,
            tau_s2,
            delta_t,
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.a_s1, self.a_s2, self.tau_s1, self.tau_s2, self.delta_t]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    /// Amplitudes may be zero (a silenced event); decays and the systolic
    /// interval must be strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in THETA_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(Error::param(*name, "must be finite"));
            }
        }
        if self.a_s1 < 0.0 || self.a_s2 < 0.0 {
            return Err(Error::param("A_S1/A_S2", "amplitudes must be >= 0"));
        }
        if self.tau_s1 <= 0.0 || self.tau_s2 <= 0.0 {
            return Err(Error::param("tau_S1/tau_S2", "decay constants must be > 0"));
        }
        if self.delta_t <= 0.0 {
            return Err(Error::param("deltaT", "must be > 0"));
        }
        Ok(())
    }
}

/// Replace both decay constants by their mean; amplitudes and `deltaT` stay.
pub fn apply_shared_tau(theta: &CycleTheta) -> CycleTheta {
    let tau = 0.5 * (theta.tau_s1 + theta.tau_s2);
    CycleTheta {
        tau_s1: tau,
        tau_s2: tau,
        ..*theta
    }
}

/// Hyperparameters shared by every cycle of a train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventHyper {
    pub f0_s1: f64,
    pub f0_s2: f64,
    pub attack: f64,
}

impl EventHyper {
    fn validate(&self, fs: f64) -> Result<()> {
        for (name, v) in [("f0_S1", self.f0_s1), ("f0_S2", self.f0_s2), ("Ta", self.attack)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        kernel::check_nyquist(self.f0_s1.max(self.f0_s2), fs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrModeTag {
    Constant,
    Explicit,
    WeakHrv,
}

/// How an RR series is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrMode {
    Constant,
    /// User-supplied intervals in seconds; the first `n_cycles` are used.
    Explicit(Vec<f64>),
    WeakHrv,
}

impl RrMode {
    pub fn tag(&self) -> RrModeTag {
        match self {
            RrMode::Constant => RrModeTag::Constant,
            RrMode::Explicit(_) => RrModeTag::Explicit,
            RrMode::WeakHrv => RrModeTag::WeakHrv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrvConfig {
    /// Mean RR interval in seconds.
    pub mean_rr: f64,
    /// Scale of the slow drift term, seconds.
    pub alpha: f64,
    /// Standard deviation of the per-beat jitter, seconds.
    pub jitter_std: f64,
    /// Moving-average length (cycles) used to smooth the drift noise.
    pub smoothing_window: usize,
    /// Accepted RR range in seconds.
    pub plausible: (f64, f64),
}

impl HrvConfig {
    pub fn fetal(mean_rr: f64) -> Self {
        Self {
            mean_rr,
            alpha: 0.01,
            jitter_std: 0.004,
            smoothing_window: 10,
            plausible: (0.25, 0.90),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::param("hrv_alpha", "must be >= 0"));
        }
        if self.jitter_std < 0.0 || !self.jitter_std.is_finite() {
            return Err(Error::param("hrv_jitter_std", "must be >= 0"));
        }
        if self.smoothing_window < 1 {
            return Err(Error::param("hrv_window", "must be >= 1"));
        }
        let (lo, hi) = self.plausible;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::param("rr_plausible", "need 0 < lo < hi"));
        }
        Ok(())
    }

    fn check_in_band(&self, name: &str, rr: f64) -> Result<()> {
        let (lo, hi) = self.plausible;
        if !(rr >= lo && rr <= hi) {
            return Err(Error::Config(format!(
                "{name} = {rr} s is outside the plausible RR band [{lo}, {hi}] s"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    pub values: Vec<f64>,
    pub mode: RrModeTag,
}

impl RrSeries {
    pub fn constant(rr: f64, n: usize) -> Self {
        Self {
            values: vec![rr; n],
            mode: RrModeTag::Constant,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::signal::mean(&self.values)
    }

    /// Cycle lengths in samples, `round(rr_k * fs)`.
    pub fn cycle_lengths(&self, fs: f64) -> Vec<usize> {
        self.values.iter().map(|rr| (rr * fs).round() as usize).collect()
    }

    /// Sample index of every onset on the concatenated grid.
    pub fn onset_samples(&self, fs: f64) -> Vec<usize> {
        let mut acc = 0usize;
        self.cycle_lengths(fs)
            .into_iter()
            .map(|len| {
                let s = acc;
                acc += len;
                s
            })
            .collect()
    }
}

/// Build an RR series of `n_cycles` intervals.
///
/// Weak-HRV mode returns `mean_rr + alpha d_k + eta_k`, where `d_k` is a
/// unit-variance moving average of i.i.d. standard normals and
/// `eta_k ~ N(0, jitter_std^2)`, clipped into the plausibility band.
pub fn make_rr_series(mode: &RrMode, cfg: &HrvConfig, n_cycles: usize, seed: u64) -> Result<RrSeries> {
    if n_cycles == 0 {
        return Err(Error::param("n_cycles", "must be >= 1"));
    }
    cfg.validate()?;
    match mode {
        RrMode::Constant => {
            cfg.check_in_band("mean RR", cfg.mean_rr)?;
            Ok(RrSeries::constant(cfg.mean_rr, n_cycles))
        }
        RrMode::Explicit(values) => {
            if values.len() < n_cycles {
                return Err(Error::Config(format!(
                    "explicit RR series has {} values, {} cycles requested",
                    values.len(),
                    n_cycles
                )));
            }
            for (k, rr) in values[..n_cycles].iter().enumerate() {
                cfg.check_in_band(&format!("rr[{k}]"), *rr)?;
            }
            Ok(RrSeries {
                values: values[..n_cycles].to_vec(),
                mode: RrModeTag::Explicit,
            })
        }
        RrMode::WeakHrv => {
            cfg.check_in_band("mean RR", cfg.mean_rr)?;
            let mut rng = seed::rng(seed);
            let w = cfg.smoothing_window;
            let z: Vec<f64> = (0..n_cycles + w - 1).map(|_| rng.sample(StandardNormal)).collect();
            let norm = (w as f64).sqrt();
            let (lo, hi) = cfg.plausible;
            let values = (0..n_cycles)
                .map(|k| {
                    let drift = z[k..k + w].iter().sum::<f64>() / norm;
                    let jitter: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.jitter_std;
                    (cfg.mean_rr + cfg.alpha * drift + jitter).clamp(lo, hi)
                })
                .collect();
            Ok(RrSeries {
                values,
                mode: RrModeTag::WeakHrv,
            })
        }
    }
}

/// Onset times: `t_1 = 0`, `t_{k+1} = t_k + rr_k`.
pub fn onset_times(rr: &RrSeries) -> Vec<f64> {
    let mut t = 0.0;
    rr.values
        .iter()
        .map(|v| {
            let cur = t;
            t += v;
            cur
        })
        .collect()
}

/// One cycle on its own buffer, starting at the S1 onset.
///
/// `time_scale` maps output samples onto the nominal time axis
/// (`t_nominal = n * time_scale / fs`); `1.0` means no stretching. The
/// buffer is at least `min_len` long and extends until both events have
/// decayed past their truncation horizon.
pub fn render_cycle(
    theta: &CycleTheta,
    hyper: &EventHyper,
    fs: f64,
    time_scale: f64,
    min_len: usize,
) -> Vec<f64> {
    let d2 = (theta.delta_t * fs).round() / fs;
    let end1 = hyper.attack + DEFAULT_DECAY_CONSTANTS * theta.tau_s1;
    let end2 = hyper.attack + DEFAULT_DECAY_CONSTANTS * theta.tau_s2;
    let t_end = end1.max(d2 + end2);
    let len = ((t_end * fs / time_scale).ceil() as usize).max(min_len);
    (0..len)
        .map(|n| {
            let t = n as f64 * time_scale / fs;
            let mut v = 0.0;
            if theta.a_s1 > 0.0 && t < end1 {
                v += kernel::kernel_unchecked(t, theta.a_s1, hyper.f0_s1, hyper.attack, theta.tau_s1);
            }
            let u = t - d2;
            if theta.a_s2 > 0.0 && u < end2 {
                v += kernel::kernel_unchecked(u, theta.a_s2, hyper.f0_s2, hyper.attack, theta.tau_s2);
            }
            v
        })
        .collect()
}

/// Shared two-event train renderer used by both the fetal and maternal
/// sources.
fn render_train(
    thetas: &[CycleTheta],
    rr: &RrSeries,
    hyper: &EventHyper,
    fs: f64,
    shared_tau: bool,
) -> Result<Signal> {
    if thetas.len() != rr.len() {
        return Err(Error::LengthMismatch(thetas.len(), rr.len()));
    }
    if rr.is_empty() {
        return Err(Error::param("rr", "empty RR series"));
    }
    hyper.validate(fs)?;
    for (k, (theta, &rr_k)) in thetas.iter().zip(&rr.values).enumerate() {
        theta.validate()?;
        if !(rr_k > 0.0) {
            return Err(Error::param(format!("rr[{k}]"), "must be > 0"));
        }
        if theta.delta_t >= rr_k {
            return Err(Error::CycleGeometry {
                cycle: k,
                delta_t: theta.delta_t,
                rr: rr_k,
            });
        }
    }

    let lengths = rr.cycle_lengths(fs);
    let nominal = (rr.mean() * fs).round().max(1.0);
    let total: usize = lengths.iter().sum();
    let mut out = vec![0.0; total];
    let mut start = 0usize;
    for (theta, &len) in thetas.iter().zip(&lengths) {
        let theta = if shared_tau { apply_shared_tau(theta) } else { *theta };
        let scale = if len == nominal as usize || len == 0 {
            1.0
        } else {
            nominal / len as f64
        };
        let cycle = render_cycle(&theta, hyper, fs, scale, len);
        for (o, v) in out[start..].iter_mut().zip(&cycle) {
            *o += v;
        }
        start += len;
    }
    Signal::new(out, fs)
}

/// Fetal event train: S1 at each onset, S2 `deltaT_k` later, cycles
/// stretched to `round(rr_k * fs)` samples and concatenated.
pub fn render_fetal_train(
    thetas: &[CycleTheta],
    rr: &RrSeries,
    hyper: &EventHyper,
    fs: f64,
    shared_tau: bool,
) -> Result<Signal> {
    render_train(thetas, rr, hyper, fs, shared_tau)
}

/// Maternal source: fixed event parameters, constant heart rate, one global
/// gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternalConfig {
    /// Maternal heart rate, bpm.
    pub mhr: f64,
    pub a_s1: f64,
    pub a_s2: f64,
    pub f0_s1: f64,
    pub f0_s2: f64,
    pub tau: f64,
    pub delta_t: f64,
    pub attack: f64,
    pub global_scale: f64,
}

impl Default for MaternalConfig {
    fn default() -> Self {
        Self {
            mhr: 80.0,
            a_s1: 1.0,
            a_s2: 0.7,
            f0_s1: 20.0,
            f0_s2: 35.0,
            tau: 0.04,
            delta_t: 0.30,
            attack: kernel::DEFAULT_ATTACK,
            global_scale: 0.2,
        }
    }
}

impl MaternalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mhr > 30.0 && self.mhr < 200.0) {
            return Err(Error::param("mhr", format!("must lie in (30, 200) bpm, got {}", self.mhr)));
        }
        if !(self.global_scale >= 0.0 && self.global_scale.is_finite()) {
            return Err(Error::param("maternal_scale", "must be >= 0"));
        }
        if self.delta_t >= 60.0 / self.mhr {
            return Err(Error::param("maternal_delta_t", "must be shorter than the maternal RR"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        60.0 / self.mhr
    }
}

/// Maternal train over `duration` seconds (`round(duration * fs)` samples),
/// beats at multiples of `60/mhr`.
pub fn render_maternal_train(cfg: &MaternalConfig, duration: f64, fs: f64) -> Result<Signal> {
    if !(duration > 0.0) {
        return Err(Error::param("duration", "must be > 0"));
    }
    cfg.validate()?;
    let total = (duration * fs).round() as usize;
    let period = cfg.period();
    let beats = ((duration / period) - 1e-9).ceil().max(1.0) as usize;
    let theta = CycleTheta::new(
        cfg.a_s1 * cfg.global_scale,
        cfg.a_s2 * cfg.global_scale,
        cfg.tau,
        cfg.tau,
        cfg.delta_t,
    );
    let hyper = EventHyper {
        f0_s1: cfg.f0_s1,
        f0_s2: cfg.f0_s2,
        attack: cfg.attack,
    };
    let rr = RrSeries::constant(period, beats);
    let mut train = render_train(&vec![theta; beats], &rr, &hyper, fs, false)?;
    train.samples.resize(total, 0.0);
    Ok(train)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper() -> EventHyper {
        EventHyper {
            f0_s1: 40.0,
            f0_s2: 50.0,
            attack: 0.008,
        }
    }

    #[test]
    fn constant_rr() {
        let cfg = HrvConfig::fetal(60.0 / 140.0);
        let rr = make_rr_series(&RrMode::Constant, &cfg, 5, 1).unwrap();
        assert_eq!(rr.values, vec![60.0 / 140.0; 5]);
    }

    #[test]
    fn weak_hrv_without_drift_is_jitter_only() {
        let cfg = HrvConfig {
            alpha: 0.0,
            ..HrvConfig::fetal(0.43)
        };
        let rr = make_rr_series(&RrMode::WeakHrv, &cfg, 200, 3).unwrap();
        let mut rng = seed::rng(3);
        let _: Vec<f64> = (0..209).map(|_| rng.sample(StandardNormal)).collect();
        for v in &rr.values {
            let eta: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.jitter_std;
            assert_eq!(*v, 0.43 + eta);
        }
    }

    #[test]
    fn rr_outside_band_is_config_error() {
        let cfg = HrvConfig::fetal(1.2);
        assert!(matches!(
            make_rr_series(&RrMode::Constant, &cfg, 3, 0),
            Err(Error::Config(_))
        ));
        let ok = HrvConfig::fetal(0.4);
        assert!(make_rr_series(&RrMode::Explicit(vec![0.4, 1.5]), &ok, 2, 0).is_err());
    }

    #[test]
    fn onsets_are_prefix_sums() {
        let rr = RrSeries {
            values: vec![0.4, 0.5, 0.45],
            mode: RrModeTag::Explicit,
        };
        let t = onset_times(&rr);
        assert_eq!(t.len(), 3);
        assert!((t[1] - 0.4).abs() < 1e-15 && (t[2] - 0.9).abs() < 1e-15 && t[0] == 0.0);
        assert_eq!(onset_times(&RrSeries::constant(0.4286, 1)), vec![0.0]);
    }

    #[test]
    fn shared_tau() {
        let th = CycleTheta::new(1.0, 0.7, 0.02, 0.04, 0.2);
        let s = apply_shared_tau(&th);
        assert!((s.tau_s1 - 0.03).abs() < 1e-15 && (s.tau_s2 - 0.03).abs() < 1e-15);
        assert_eq!((s.a_s1, s.a_s2, s.delta_t), (1.0, 0.7, 0.2));
        let same = CycleTheta::new(1.0, 0.7, 0.025, 0.025, 0.2);
        assert_eq!(apply_shared_tau(&same), same);
    }

    #[test]
    fn single_s1_has_no_energy_after_horizon() {
        let th = CycleTheta::new(1.0, 0.0, 0.02, 0.02, 0.2);
        let rr = RrSeries::constant(0.43, 1);
        let s = render_fetal_train(&[th], &rr, &hyper(), 1000.0, false).unwrap();
        let cut = ((0.2 + 0.008 + 0.16) * 1000.0) as usize;
        assert!(s.samples[cut..].iter().all(|v| *v == 0.0));
        assert!(s.samples[..168].iter().any(|v| *v != 0.0));
        assert!(s.samples[168..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identical_cycles_repeat_exactly() {
        let th = CycleTheta::new(1.0, 0.7, 0.02, 0.02, 0.2);
        let rr = RrSeries::constant(0.43, 3);
        let s = render_fetal_train(&[th; 3], &rr, &hyper(), 1000.0, false).unwrap();
        assert_eq!(s.len(), 3 * 430);
        assert_eq!(s.samples[..430], s.samples[430..860]);
        assert_eq!(s.samples[..430], s.samples[860..]);
    }

    #[test]
    fn geometry_error_names_cycle() {
        let ok = CycleTheta::new(1.0, 0.7, 0.02, 0.02, 0.2);
        let bad = CycleTheta::new(1.0, 0.7, 0.02, 0.02, 0.5);
        let rr = RrSeries::constant(0.43, 3);
        match render_fetal_train(&[ok, ok, bad], &rr, &hyper(), 1000.0, false) {
            Err(Error::CycleGeometry { cycle, .. }) => assert_eq!(cycle, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn maternal_beats() {
        let cfg = MaternalConfig {
            global_scale: 0.0,
            ..Default::default()
        };
        let s = render_maternal_train(&cfg, 3.0, 1000.0).unwrap();
        assert_eq!(s.len(), 3000);
        assert!(s.samples.iter().all(|v| *v == 0.0));

        let cfg = MaternalConfig::default();
        let s = render_maternal_train(&cfg, 3.0, 1000.0).unwrap();
        // each beat starts with a zero sample followed by the S1 attack
        for onset in [0usize, 750, 1500, 2250] {
            assert!(s.samples[onset + 1] > 0.0, "beat at {onset}");
        }
        let one = render_cycle(
            &CycleTheta::new(cfg.global_scale, 0.7 * cfg.global_scale, 0.04, 0.04, 0.3),
            &EventHyper {
                f0_s1: 20.0,
                f0_s2: 35.0,
                attack: 0.008,
            },
            1000.0,
            1.0,
            750,
        );
        assert_eq!(&s.samples[..300], &one[..300]);
    }

    #[test]
    fn stretched_cycle_has_target_length() {
        let th = CycleTheta::new(1.0, 0.7, 0.02, 0.02, 0.2);
        let rr = RrSeries {
            values: vec![0.40, 0.45, 0.43],
            mode: RrModeTag::Explicit,
        };
        let s = render_fetal_train(&[th; 3], &rr, &hyper(), 1000.0, false).unwrap();
        assert_eq!(s.len(), 400 + 450 + 430);
    }
}

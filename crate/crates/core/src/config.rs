//! INI-backed simulation configuration.
//!
//! [`SCHEMA`] lists every key once with its section, default and suggested
//! range; INI loading, command-line `--set` overrides and API override maps
//! all go through [`SimConfig::set`], so every key is reachable the same
//! way from each entry point.

use std::fmt::Write as _;
use std::path::Path;

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heart::{EventHyper, HrvConfig, MaternalConfig, RrMode, RrModeTag};
use crate::kernel::{self, DEFAULT_ATTACK};
use crate::noise::{MovementConfig, NoiseConfig, UterineConfig};
use crate::sampler::{ParamBounds, PriorKind, PriorSpec, DIM};
use crate::transmission::TransmissionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Float,
    Int,
    Bool,
    /// Two floats written `(a, b)`.
    Pair,
    /// Comma-separated floats.
    List,
    Text,
}

/// One configurable key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamSpec {
    pub key: &'static str,
    pub section: &'static str,
    pub kind: ValueKind,
    /// Suggested range; pairs apply it to both ends.
    pub range: Option<(f64, f64)>,
    /// Allowed words for text keys.
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    pub choices: &'static [&'static str],
    pub unit: &'static str,
    pub help: &'static str,
}

const fn p(
    key: &'static str,
    section: &'static str,
    kind: ValueKind,
    range: Option<(f64, f64)>,
    unit: &'static str,
    help: &'static str,
) -> ParamSpec {
    ParamSpec {
        key,
        section,
        kind,
        range,
        choices: &[],
        unit,
        help,
    }
}

const fn choice(key: &'static str, section: &'static str, choices: &'static [&'static str], help: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        section,
        kind: ValueKind::Text,
        range: None,
        choices,
        unit: "",
        help,
    }
}

use ValueKind::*;

pub const SCHEMA: &[ParamSpec] = &[
    p("num_samples", "dataset", Int, None, "", "recordings per batch"),
    p("cycles_per_sample", "dataset", Int, None, "", "fetal cycles per recording"),
    p("fs", "dataset", Float, Some((500.0, 2000.0)), "Hz", "sampling rate"),
    p("seed", "dataset", Int, None, "", "master random seed"),
    p("preset", "dataset", Text, None, "", "name of the preset this configuration came from"),
    p("fhr", "heart", Float, Some((120.0, 160.0)), "bpm", "fetal heart rate"),
    p("mhr", "heart", Float, Some((60.0, 100.0)), "bpm", "maternal heart rate"),
    choice("rr_mode", "heart", &["constant", "weak_hrv", "explicit"], "how fetal RR intervals are produced"),
    p("rr_series", "heart", List, Some((0.25, 0.9)), "s", "explicit RR intervals"),
    p("hrv_alpha", "heart", Float, Some((0.0, 0.05)), "s", "drift scale of weak HRV"),
    p("hrv_jitter_std", "heart", Float, Some((0.0, 0.02)), "s", "beat-to-beat jitter of weak HRV"),
    p("hrv_window", "heart", Int, Some((1.0, 50.0)), "cycles", "drift smoothing window"),
    p("f0_S1", "fetal", Float, Some((30.0, 60.0)), "Hz", "fetal S1 carrier"),
    p("f0_S2", "fetal", Float, Some((40.0, 80.0)), "Hz", "fetal S2 carrier"),
    p("Ta", "fetal", Float, Some((0.004, 0.015)), "s", "event attack time"),
    p("shared_tau", "fetal", Bool, None, "", "use one decay for S1 and S2 of a cycle"),
    p("maternal_scale", "maternal", Float, Some((0.0, 1.0)), "", "global maternal gain"),
    p("maternal_A_S1", "maternal", Float, Some((0.5, 1.5)), "", "maternal S1 amplitude"),
    p("maternal_A_S2", "maternal", Float, Some((0.3, 1.2)), "", "maternal S2 amplitude"),
    p("maternal_f0_S1", "maternal", Float, Some((15.0, 30.0)), "Hz", "maternal S1 carrier"),
    p("maternal_f0_S2", "maternal", Float, Some((25.0, 50.0)), "Hz", "maternal S2 carrier"),
    p("maternal_tau", "maternal", Float, Some((0.02, 0.06)), "s", "maternal event decay"),
    p("maternal_deltaT", "maternal", Float, Some((0.25, 0.35)), "s", "maternal S1-S2 interval"),
    p("r1", "transmission", Float, Some((0.005, 0.02)), "m", "first layer path length"),
    p("c1", "transmission", Float, Some((1400.0, 1600.0)), "m/s", "first layer sound speed"),
    p("beta1", "transmission", Float, Some((50.0, 150.0)), "1/s", "first kernel decay rate"),
    p("A1", "transmission", Float, Some((0.5, 1.5)), "", "first kernel gain"),
    p("r2", "transmission", Float, Some((0.02, 0.05)), "m", "second layer path length"),
    p("c2", "transmission", Float, Some((1500.0, 1600.0)), "m/s", "second layer sound speed"),
    p("beta2", "transmission", Float, Some((200.0, 400.0)), "1/s", "second kernel decay rate"),
    p("A2", "transmission", Float, Some((0.5, 1.0)), "", "second kernel gain"),
    p("transmission_delays", "transmission", Bool, None, "", "delay each kernel by r/c"),
    p("snr_db", "noise", Float, Some((5.0, 20.0)), "dB", "cardiac-to-noise ratio; inf disables noise"),
    p("noise_rho", "noise", Float, Some((0.0, 0.99)), "", "AR(1) coefficient"),
    p("noise_gamma", "noise", Float, Some((0.0, 1.0)), "", "slow gain modulation depth"),
    p("noise_lp_cutoff", "noise", Float, Some((0.1, 2.0)), "Hz", "gain modulation bandwidth"),
    p("movement_enabled", "movement", Bool, None, "", "fetal movement artifacts"),
    p("movement_intensity", "movement", Float, Some((1.0, 2.0)), "", "burst level relative to cardiac RMS"),
    p("movement_rate_per_min", "movement", Float, Some((5.0, 15.0)), "1/min", "movement rate"),
    p("movement_duration_range", "movement", Pair, Some((0.1, 0.5)), "s", "burst duration range"),
    p("movement_band", "movement", Pair, Some((10.0, 300.0)), "Hz", "burst frequency band"),
    p("movement_thump_prob", "movement", Float, Some((0.2, 0.5)), "", "probability of a low-frequency thump"),
    p("uc_enabled", "uterine", Bool, None, "", "uterine contractions"),
    p("uc_rate_per_10min", "uterine", Float, Some((2.0, 6.0)), "1/10min", "contraction rate"),
    p("uc_duration_range", "uterine", Pair, Some((5.0, 30.0)), "s", "contraction duration range"),
    p("uc_rise_fall_frac", "uterine", Pair, Some((0.3, 0.4)), "", "rise and fall fractions"),
    p("uc_attenuation", "uterine", Float, Some((0.3, 0.6)), "", "cardiac attenuation at the plateau"),
    p("uc_noise_band", "uterine", Pair, Some((0.5, 20.0)), "Hz", "contraction noise band"),
    p("uc_noise_intensity", "uterine", Float, Some((0.5, 1.0)), "", "contraction noise level relative to cardiac RMS"),
    choice("prior", "sampler", &["uniform", "truncated_gaussian", "ensemble_mcmc"], "per-cycle sampling mode"),
    p("A_S1_range", "sampler", Pair, Some((0.01, 5.0)), "", "S1 amplitude box"),
    p("A_S2_range", "sampler", Pair, Some((0.01, 5.0)), "", "S2 amplitude box"),
    p("tau_S1_range", "sampler", Pair, Some((0.003, 0.1)), "s", "S1 decay box"),
    p("tau_S2_range", "sampler", Pair, Some((0.003, 0.1)), "s", "S2 decay box"),
    p("deltaT_range", "sampler", Pair, Some((0.1, 0.4)), "s", "S1-S2 interval box"),
    p("gaussian_mean", "sampler", List, None, "", "truncated Gaussian centre (5 values, empty for box midpoint)"),
    p("gaussian_std", "sampler", List, None, "", "truncated Gaussian spread (5 values, empty for box width / 4)"),
    p("mcmc_walkers", "sampler", Int, Some((10.0, 256.0)), "", "ensemble size"),
    p("mcmc_burn_in", "sampler", Int, Some((0.0, 5000.0)), "steps", "discarded ensemble steps"),
    p("mcmc_thin", "sampler", Int, Some((1.0, 100.0)), "steps", "keep every n-th ensemble step"),
    p("stabilize_deltaT", "sampler", Bool, None, "", "replace sampled deltaT by bootstrap draws"),
    p("deltaT_bootstrap", "sampler", List, Some((0.1, 0.4)), "s", "measured S1-S2 intervals to bootstrap from"),
];

pub fn spec(key: &str) -> Option<&'static ParamSpec> {
    SCHEMA.iter().find(|s| s.key == key)
}

/// Complete simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_samples: usize,
    pub cycles_per_sample: usize,
    pub fs: f64,
    pub seed: u64,
    pub preset: String,
    pub fhr: f64,
    pub rr_mode: RrModeTag,
    pub rr_series: Vec<f64>,
    pub hrv_alpha: f64,
    pub hrv_jitter_std: f64,
    pub hrv_window: usize,
    pub f0_s1: f64,
    pub f0_s2: f64,
    pub attack: f64,
    pub shared_tau: bool,
    pub maternal: MaternalConfig,
    pub transmission: TransmissionConfig,
    pub noise: NoiseConfig,
    pub movement: MovementConfig,
    pub uterine: UterineConfig,
    pub prior: PriorSpec,
    pub bounds: ParamBounds,
    pub stabilize_delta_t: bool,
    pub delta_t_bootstrap: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let hrv = HrvConfig::fetal(60.0 / 140.0);
        Self {
            num_samples: 10,
            cycles_per_sample: 100,
            fs: 1000.0,
            seed: 0,
            preset: "normal".into(),
            fhr: 140.0,
            rr_mode: RrModeTag::Constant,
            rr_series: Vec::new(),
            hrv_alpha: hrv.alpha,
            hrv_jitter_std: hrv.jitter_std,
            hrv_window: hrv.smoothing_window,
            f0_s1: 40.0,
            f0_s2: 50.0,
            attack: DEFAULT_ATTACK,
            shared_tau: false,
            maternal: MaternalConfig::default(),
            transmission: TransmissionConfig::default(),
            noise: NoiseConfig::default(),
            movement: MovementConfig::default(),
            uterine: UterineConfig::default(),
            prior: PriorSpec::default(),
            bounds: ParamBounds::default_box(),
            stabilize_delta_t: false,
            delta_t_bootstrap: Vec::new(),
        }
    }
}

fn fmt_f(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(", ")
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::param(key, format!("cannot parse `{value}` as {what}"))
}

fn parse_f(key: &str, s: &str) -> Result<f64> {
    let t = s.trim();
    let v = match t.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "off" => f64::INFINITY,
        _ => t.parse::<f64>().map_err(|_| bad(key, s, "a number"))?,
    };
    if v.is_nan() {
        return Err(bad(key, s, "a number"));
    }
    Ok(v)
}

fn parse_finite(key: &str, s: &str) -> Result<f64> {
    let v = parse_f(key, s)?;
    if !v.is_finite() {
        return Err(bad(key, s, "a finite number"));
    }
    Ok(v)
}

fn parse_int<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim().parse::<T>().map_err(|_| bad(key, s, "a non-negative integer"))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, s, "true/false")),
    }
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    let t = s.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
    if t.trim().is_empty() {
        return Ok(Vec::new());
    }
    t.split(',').map(|v| parse_finite(key, v)).collect()
}

fn parse_pair(key: &str, s: &str) -> Result<(f64, f64)> {
    match parse_list(key, s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(bad(key, s, "a pair `(a, b)`")),
    }
}

fn fmt_pair((a, b): (f64, f64)) -> String {
    format!("({}, {})", fmt_f(a), fmt_f(b))
}

/// A value outside its suggested range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeIssue {
    pub key: String,
    pub value: String,
    pub range: (f64, f64),
}

impl std::fmt::Display for RangeIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "`{}` = {} is outside the suggested range {}..{}",
            self.key, self.value, self.range.0, self.range.1
        )
    }
}

impl SimConfig {
    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key;
        let v = value;
        let box_idx = |k: &str| ["A_S1_range", "A_S2_range", "tau_S1_range", "tau_S2_range", "deltaT_range"].iter().position(|n| *n == k);
        match k {
            "num_samples" => self.num_samples = parse_int(k, v)?,
            "cycles_per_sample" => self.cycles_per_sample = parse_int(k, v)?,
            "fs" => self.fs = parse_finite(k, v)?,
            "seed" => self.seed = parse_int(k, v)?,
            "preset" => self.preset = v.trim().to_string(),
            "fhr" => self.fhr = parse_finite(k, v)?,
            "mhr" => self.maternal.mhr = parse_finite(k, v)?,
            "rr_mode" => {
                self.rr_mode = match v.trim().to_ascii_lowercase().as_str() {
                    "constant" => RrModeTag::Constant,
                    "weak_hrv" | "hrv" => RrModeTag::WeakHrv,
                    "explicit" => RrModeTag::Explicit,
                    _ => return Err(bad(k, v, "constant, weak_hrv or explicit")),
                }
            }
            "rr_series" => self.rr_series = parse_list(k, v)?,
            "hrv_alpha" => self.hrv_alpha = parse_finite(k, v)?,
            "hrv_jitter_std" => self.hrv_jitter_std = parse_finite(k, v)?,
            "hrv_window" => self.hrv_window = parse_int(k, v)?,
            "f0_S1" => self.f0_s1 = parse_finite(k, v)?,
            "f0_S2" => self.f0_s2 = parse_finite(k, v)?,
            "Ta" => self.attack = parse_finite(k, v)?,
            "shared_tau" => self.shared_tau = parse_bool(k, v)?,
            "maternal_scale" => self.maternal.global_scale = parse_finite(k, v)?,
            "maternal_A_S1" => self.maternal.a_s1 = parse_finite(k, v)?,
            "maternal_A_S2" => self.maternal.a_s2 = parse_finite(k, v)?,
            "maternal_f0_S1" => self.maternal.f0_s1 = parse_finite(k, v)?,
            "maternal_f0_S2" => self.maternal.f0_s2 = parse_finite(k, v)?,
            "maternal_tau" => self.maternal.tau = parse_finite(k, v)?,
            "maternal_deltaT" => self.maternal.delta_t = parse_finite(k, v)?,
            "r1" => self.transmission.r1 = parse_finite(k, v)?,
            "c1" => self.transmission.c1 = parse_finite(k, v)?,
            "beta1" => self.transmission.beta1 = parse_finite(k, v)?,
            "A1" => self.transmission.a1 = parse_finite(k, v)?,
            "r2" => self.transmission.r2 = parse_finite(k, v)?,
            "c2" => self.transmission.c2 = parse_finite(k, v)?,
            "beta2" => self.transmission.beta2 = parse_finite(k, v)?,
            "A2" => self.transmission.a2 = parse_finite(k, v)?,
            "transmission_delays" => self.transmission.use_delays = parse_bool(k, v)?,
            "snr_db" => self.noise.snr_db = parse_f(k, v)?,
            "noise_rho" => self.noise.rho = parse_finite(k, v)?,
            "noise_gamma" => self.noise.gamma = parse_finite(k, v)?,
            "noise_lp_cutoff" => self.noise.lp_cutoff = parse_finite(k, v)?,
            "movement_enabled" => self.movement.enabled = parse_bool(k, v)?,
            "movement_intensity" => self.movement.intensity = parse_finite(k, v)?,
            "movement_rate_per_min" => self.movement.rate_per_min = parse_finite(k, v)?,
            "movement_duration_range" => self.movement.duration_range = parse_pair(k, v)?,
            "movement_band" => self.movement.band = parse_pair(k, v)?,
            "movement_thump_prob" => self.movement.thump_prob = parse_finite(k, v)?,
            "uc_enabled" => self.uterine.enabled = parse_bool(k, v)?,
            "uc_rate_per_10min" => self.uterine.rate_per_10min = parse_finite(k, v)?,
            "uc_duration_range" => self.uterine.duration_range = parse_pair(k, v)?,
            "uc_rise_fall_frac" => self.uterine.rise_fall_frac = parse_pair(k, v)?,
            "uc_attenuation" => self.uterine.attenuation = parse_finite(k, v)?,
            "uc_noise_band" => self.uterine.noise_band = parse_pair(k, v)?,
            "uc_noise_intensity" => self.uterine.noise_intensity = parse_finite(k, v)?,
            "prior" => self.prior.kind = v.parse::<PriorKind>()?,
            "gaussian_mean" | "gaussian_std" => {
                let list = parse_list(k, v)?;
                let arr = match list.len() {
                    0 => None,
                    DIM => Some(std::array::from_fn(|i| list[i])),
                    n => return Err(Error::param(k, format!("expected {DIM} values, got {n}"))),
                };
                if k == "gaussian_mean" {
                    self.prior.mean = arr;
                } else {
                    self.prior.std = arr;
                }
            }
            "mcmc_walkers" => self.prior.walkers = parse_int(k, v)?,
            "mcmc_burn_in" => self.prior.burn_in = parse_int(k, v)?,
            "mcmc_thin" => self.prior.thin = parse_int(k, v)?,
            "stabilize_deltaT" => self.stabilize_delta_t = parse_bool(k, v)?,
            "deltaT_bootstrap" => self.delta_t_bootstrap = parse_list(k, v)?,
            _ => match box_idx(k) {
                Some(i) => {
                    let (lo, hi) = parse_pair(k, v)?;
                    self.bounds.lower[i] = lo;
                    self.bounds.upper[i] = hi;
                }
                None => return Err(Error::Config(format!("unknown key `{k}`"))),
            },
        }
        Ok(())
    }

    /// Text form of one key, parseable by [`SimConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let pair_of = |i: usize| fmt_pair((self.bounds.lower[i], self.bounds.upper[i]));
        Some(match key {
            "num_samples" => self.num_samples.to_string(),
            "cycles_per_sample" => self.cycles_per_sample.to_string(),
            "fs" => fmt_f(self.fs),
            "seed" => self.seed.to_string(),
            "preset" => self.preset.clone(),
            "fhr" => fmt_f(self.fhr),
            "mhr" => fmt_f(self.maternal.mhr),
            "rr_mode" => match self.rr_mode {
                RrModeTag::Constant => "constant",
                RrModeTag::WeakHrv => "weak_hrv",
                RrModeTag::Explicit => "explicit",
            }
            .into(),
            "rr_series" => fmt_list(&self.rr_series),
            "hrv_alpha" => fmt_f(self.hrv_alpha),
            "hrv_jitter_std" => fmt_f(self.hrv_jitter_std),
            "hrv_window" => self.hrv_window.to_string(),
            "f0_S1" => fmt_f(self.f0_s1),
            "f0_S2" => fmt_f(self.f0_s2),
            "Ta" => fmt_f(self.attack),
            "shared_tau" => self.shared_tau.to_string(),
            "maternal_scale" => fmt_f(self.maternal.global_scale),
            "maternal_A_S1" => fmt_f(self.maternal.a_s1),
            "maternal_A_S2" => fmt_f(self.maternal.a_s2),
            "maternal_f0_S1" => fmt_f(self.maternal.f0_s1),
            "maternal_f0_S2" => fmt_f(self.maternal.f0_s2),
            "maternal_tau" => fmt_f(self.maternal.tau),
            "maternal_deltaT" => fmt_f(self.maternal.delta_t),
            "r1" => fmt_f(self.transmission.r1),
            "c1" => fmt_f(self.transmission.c1),
            "beta1" => fmt_f(self.transmission.beta1),
            "A1" => fmt_f(self.transmission.a1),
            "r2" => fmt_f(self.transmission.r2),
            "c2" => fmt_f(self.transmission.c2),
            "beta2" => fmt_f(self.transmission.beta2),
            "A2" => fmt_f(self.transmission.a2),
            "transmission_delays" => self.transmission.use_delays.to_string(),
            "snr_db" => fmt_f(self.noise.snr_db),
            "noise_rho" => fmt_f(self.noise.rho),
            "noise_gamma" => fmt_f(self.noise.gamma),
            "noise_lp_cutoff" => fmt_f(self.noise.lp_cutoff),
            "movement_enabled" => self.movement.enabled.to_string(),
            "movement_intensity" => fmt_f(self.movement.intensity),
            "movement_rate_per_min" => fmt_f(self.movement.rate_per_min),
            "movement_duration_range" => fmt_pair(self.movement.duration_range),
            "movement_band" => fmt_pair(self.movement.band),
            "movement_thump_prob" => fmt_f(self.movement.thump_prob),
            "uc_enabled" => self.uterine.enabled.to_string(),
            "uc_rate_per_10min" => fmt_f(self.uterine.rate_per_10min),
            "uc_duration_range" => fmt_pair(self.uterine.duration_range),
            "uc_rise_fall_frac" => fmt_pair(self.uterine.rise_fall_frac),
            "uc_attenuation" => fmt_f(self.uterine.attenuation),
            "uc_noise_band" => fmt_pair(self.uterine.noise_band),
            "uc_noise_intensity" => fmt_f(self.uterine.noise_intensity),
            "prior" => self.prior.kind.as_str().into(),
            "A_S1_range" => pair_of(0),
            "A_S2_range" => pair_of(1),
            "tau_S1_range" => pair_of(2),
            "tau_S2_range" => pair_of(3),
            "deltaT_range" => pair_of(4),
            "gaussian_mean" => self.prior.mean.map(|m| fmt_list(&m)).unwrap_or_default(),
            "gaussian_std" => self.prior.std.map(|m| fmt_list(&m)).unwrap_or_default(),
            "mcmc_walkers" => self.prior.walkers.to_string(),
            "mcmc_burn_in" => self.prior.burn_in.to_string(),
            "mcmc_thin" => self.prior.thin.to_string(),
            "stabilize_deltaT" => self.stabilize_delta_t.to_string(),
            "deltaT_bootstrap" => fmt_list(&self.delta_t_bootstrap),
            _ => return None,
        })
    }

    /// Values outside their suggested ranges. An infinite `snr_db` is the
    /// noise-off switch and is not reported.
    pub fn range_issues(&self) -> Vec<RangeIssue> {
        let mut out = Vec::new();
        for s in SCHEMA {
            let Some((lo, hi)) = s.range else { continue };
            let Some(text) = self.get(s.key) else { continue };
            let values: Vec<f64> = match s.kind {
                Float | Int => match parse_f(s.key, &text) {
                    Ok(v) if s.key == "snr_db" && v == f64::INFINITY => continue,
                    Ok(v) => vec![v],
                    Err(_) => continue,
                },
                Pair | List => parse_list(s.key, &text).unwrap_or_default(),
                _ => continue,
            };
            if values.iter().any(|v| *v < lo || *v > hi) {
                out.push(RangeIssue {
                    key: s.key.into(),
                    value: text,
                    range: (lo, hi),
                });
            }
        }
        out
    }

    /// Hard invariants that synthesis cannot work without.
    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) {
            return Err(Error::param("fs", "must be > 0"));
        }
        if self.cycles_per_sample == 0 {
            return Err(Error::param("cycles_per_sample", "must be >= 1"));
        }
        if self.num_samples == 0 {
            return Err(Error::param("num_samples", "must be >= 1"));
        }
        if !(self.fhr > 0.0) {
            return Err(Error::param("fhr", "must be > 0"));
        }
        for (name, f0) in [
            ("f0_S1", self.f0_s1),
            ("f0_S2", self.f0_s2),
            ("maternal_f0_S1", self.maternal.f0_s1),
            ("maternal_f0_S2", self.maternal.f0_s2),
        ] {
            if !(f0 > 0.0) {
                return Err(Error::param(name, "must be > 0"));
            }
            kernel::check_nyquist(f0, self.fs)?;
        }
        if !(self.attack > 0.0) {
            return Err(Error::param("Ta", "must be > 0"));
        }
        self.hrv().validate()?;
        if self.rr_mode == RrModeTag::Explicit && self.rr_series.len() < self.cycles_per_sample {
            return Err(Error::param(
                "rr_series",
                format!(
                    "explicit mode needs {} intervals, got {}",
                    self.cycles_per_sample,
                    self.rr_series.len()
                ),
            ));
        }
        self.maternal().validate()?;
        if !(self.maternal.a_s1 >= 0.0 && self.maternal.a_s2 >= 0.0 && self.maternal.tau > 0.0 && self.maternal.delta_t > 0.0) {
            return Err(Error::param("maternal", "amplitudes must be >= 0, tau and deltaT > 0"));
        }
        self.transmission.validate()?;
        self.noise.validate(self.fs)?;
        self.movement.validate()?;
        self.uterine.validate()?;
        self.bounds.validate_within(&ParamBounds::global())?;
        if self.prior.kind == PriorKind::EnsembleMcmc && self.prior.walkers < 2 * DIM {
            return Err(Error::param("mcmc_walkers", format!("need at least {}", 2 * DIM)));
        }
        if self.stabilize_delta_t && self.delta_t_bootstrap.is_empty() {
            return Err(Error::param("deltaT_bootstrap", "stabilize_deltaT needs measured intervals"));
        }
        Ok(())
    }

    pub fn mean_rr(&self) -> f64 {
        60.0 / self.fhr
    }

    pub fn hrv(&self) -> HrvConfig {
        HrvConfig {
            alpha: self.hrv_alpha,
            jitter_std: self.hrv_jitter_std,
            smoothing_window: self.hrv_window,
            ..HrvConfig::fetal(self.mean_rr())
        }
    }

    pub fn rr_mode(&self) -> RrMode {
        match self.rr_mode {
            RrModeTag::Constant => RrMode::Constant,
            RrModeTag::WeakHrv => RrMode::WeakHrv,
            RrModeTag::Explicit => RrMode::Explicit(self.rr_series.clone()),
        }
    }

    pub fn hyper(&self) -> EventHyper {
        EventHyper {
            f0_s1: self.f0_s1,
            f0_s2: self.f0_s2,
            attack: self.attack,
        }
    }

    /// Maternal source with the shared attack time.
    pub fn maternal(&self) -> MaternalConfig {
        MaternalConfig {
            attack: self.attack,
            ..self.maternal
        }
    }

    /// Serialize to INI; [`load_config`] reads it back to an equal value.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for s in SCHEMA {
            if s.section != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = s.section;
                let _ = writeln!(out, "[{section}]");
            }
            let _ = writeln!(out, "{} = {}", s.key, self.get(s.key).unwrap_or_default());
        }
        out
    }
}

/// Result of reading an INI document.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub config: SimConfig,
    pub warnings: Vec<String>,
}

/// Apply an INI document on top of `base`. Keys are matched by name in any
/// section; unknown keys and out-of-range values produce warnings, or an
/// error for out-of-range values when `strict` is set.
pub fn apply_ini(base: SimConfig, text: &str, strict: bool) -> Result<Loaded> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("malformed INI: {e}")))?;
    let mut config = base;
    let mut warnings = Vec::new();
    for (section, props) in ini.iter() {
        for (key, value) in props.iter() {
            match spec(key) {
                Some(s) => {
                    if let Some(sec) = section {
                        if sec != s.section {
                            warnings.push(format!("`{key}` belongs in [{}], found in [{sec}]", s.section));
                        }
                    }
                    config.set(key, value)?;
                }
                None => warnings.push(format!("unknown key `{key}` ignored")),
            }
        }
    }
    finish(config, warnings, strict)
}

fn finish(config: SimConfig, mut warnings: Vec<String>, strict: bool) -> Result<Loaded> {
    config.validate()?;
    let issues = config.range_issues();
    if strict {
        if let Some(first) = issues.first() {
            return Err(Error::InvalidParameter {
                name: first.key.clone(),
                reason: first.to_string(),
            });
        }
    }
    warnings.extend(issues.iter().map(|i| i.to_string()));
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Loaded { config, warnings })
}

/// Parse INI text over the built-in defaults.
pub fn load_config(text: &str, strict: bool) -> Result<Loaded> {
    apply_ini(SimConfig::default(), text, strict)
}

pub fn load_config_file(path: &Path, strict: bool) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_config(&text, strict)
}

/// Apply `key=value` overrides (command line or API), then validate.
pub fn apply_overrides<'a, I>(base: SimConfig, overrides: I, strict: bool) -> Result<Loaded>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut config = base;
    for (k, v) in overrides {
        if spec(k).is_none() {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        config.set(k, v)?;
    }
    finish(config, Vec::new(), strict)
}

/// Named configuration stored as an INI fragment over the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    #[serde(skip)]
    pub ini: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "normal",
        description: "Defaults: 140 bpm, 10 dB SNR, movements and contractions on",
        ini: include_str!("../presets/normal.ini"),
    },
    Preset {
        name: "prolonged_systole",
        description: "S1-S2 interval shifted towards longer systole",
        ini: include_str!("../presets/prolonged_systole.ini"),
    },
    Preset {
        name: "s2_dominant",
        description: "S2 louder than S1 (inverted amplitude ratio)",
        ini: include_str!("../presets/s2_dominant.ini"),
    },
    Preset {
        name: "low_snr",
        description: "Deep abdominal path with 5 dB SNR and frequent movements",
        ini: include_str!("../presets/low_snr.ini"),
    },
    Preset {
        name: "variable_rhythm",
        description: "Weak heart-rate variability with a shared S1/S2 envelope",
        ini: include_str!("../presets/variable_rhythm.ini"),
    },
    Preset {
        name: "clean",
        description: "Noise, artifacts and maternal sounds switched off",
        ini: include_str!("../presets/clean.ini"),
    },
];

pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))
}

/// Defaults with the named preset applied.
pub fn preset_config(name: &str) -> Result<SimConfig> {
    let p = preset(name)?;
    let mut cfg = apply_ini(SimConfig::default(), p.ini, false)?.config;
    cfg.preset = p.name.to_string();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = load_config("", true).unwrap().config;
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.fhr, 140.0);
        assert_eq!(c.maternal.mhr, 80.0);
        assert_eq!(c.fs, 1000.0);
        assert_eq!(c.noise.snr_db, 10.0);
        assert_eq!(c.transmission.beta1, 100.0);
        assert_eq!(c.transmission.beta2, 300.0);
        assert_eq!(c.transmission.a1, 1.0);
        assert_eq!(c.transmission.a2, 0.8);
    }

    #[test]
    fn defaults_are_inside_suggested_ranges() {
        assert!(SimConfig::default().range_issues().is_empty(), "{:?}", SimConfig::default().range_issues());
    }

    #[test]
    fn strict_mode_rejects_out_of_range() {
        let err = load_config("[heart]\nfhr = 500\n", true).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref name, .. } if name == "fhr"));
        let lax = load_config("[heart]\nfhr = 500\n", false).unwrap();
        assert!(lax.warnings.iter().any(|w| w.contains("fhr")));
    }

    #[test]
    fn unknown_keys_warn() {
        let l = load_config("[noise]\nbogus = 1\n", false).unwrap();
        assert!(l.warnings.iter().any(|w| w.contains("bogus")));
    }

    #[test]
    fn ini_round_trip() {
        let mut c = SimConfig::default();
        c.set("snr_db", "inf").unwrap();
        c.set("movement_band", "(12.5, 180)").unwrap();
        c.set("gaussian_std", "0.1, 0.1, 0.002, 0.002, 0.01").unwrap();
        let back = load_config(&c.to_ini(), false).unwrap().config;
        assert_eq!(back, c);
    }

    #[test]
    fn every_key_round_trips_through_get_set() {
        let base = SimConfig::default();
        for s in SCHEMA {
            let text = base.get(s.key).unwrap_or_else(|| panic!("{} has no getter", s.key));
            let mut c = base.clone();
            c.set(s.key, &text).unwrap();
            assert_eq!(c, base, "{}", s.key);
        }
    }

    #[test]
    fn presets_load() {
        for p in PRESETS {
            let c = preset_config(p.name).unwrap();
            assert_eq!(c.preset, p.name);
        }
        assert!(preset_config("nope").is_err());
    }
}

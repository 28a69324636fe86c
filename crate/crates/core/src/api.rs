//! JSON request/response types and handlers behind the synthesis service.
//!
//! Handlers are plain functions so the HTTP layer only routes and maps
//! [`ApiError::status`] onto the response.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{self, AcfCurve, ComparisonReport, PreprocConfig, PsdCurve};
use crate::config::{self, ParamSpec, SimConfig, PRESETS, SCHEMA};
use crate::error::Error;
use crate::signal::Signal;
use crate::simulate::{simulate, Annotations};

/// Largest accepted `n_cycles`.
pub const MAX_CYCLES: usize = 2000;

/// Default cap on returned waveform length, seconds.
pub const DEFAULT_MAX_SECONDS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}

impl ApiError {
    fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Self {
            status: 422,
            error: msg.into(),
            field: Some(field.into()),
            stage: None,
        }
    }

    fn bad_request(msg: impl Into<String>) -> Self {
        Self {
            status: 400,
            error: msg.into(),
            field: None,
            stage: None,
        }
    }

    /// Parameter problems become 422 naming the field; anything else is a
    /// 500 carrying the failing stage.
    fn from_error(e: Error) -> Self {
        let stage = e.stage().map(str::to_string);
        let mut inner = &e;
        while let Error::Stage { source, .. } = inner {
            inner = source;
        }
        match inner {
            Error::InvalidParameter { name, .. } => Self {
                status: 422,
                error: e.to_string(),
                field: Some(name.clone()),
                stage,
            },
            Error::Config(_) | Error::CycleGeometry { .. } | Error::Aliasing { .. } | Error::MisspecifiedPrior(_) => {
                Self {
                    status: 422,
                    error: e.to_string(),
                    field: None,
                    stage,
                }
            }
            _ => Self {
                status: 500,
                error: e.to_string(),
                field: None,
                stage,
            },
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetEntry {
    pub name: String,
    pub description: String,
    /// Every schema key with its value under this preset.
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamEntry {
    #[serde(flatten)]
    pub spec: ParamSpec,
    pub default: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetCatalog {
    pub presets: Vec<PresetEntry>,
    pub parameters: Vec<ParamEntry>,
}

fn values_of(cfg: &SimConfig) -> BTreeMap<String, String> {
    SCHEMA
        .iter()
        .filter_map(|s| cfg.get(s.key).map(|v| (s.key.to_string(), v)))
        .collect()
}

pub fn presets() -> Result<PresetCatalog, ApiError> {
    let presets = PRESETS
        .iter()
        .map(|p| {
            let cfg = config::preset_config(p.name).map_err(ApiError::from_error)?;
            Ok(PresetEntry {
                name: p.name.to_string(),
                description: p.description.to_string(),
                values: values_of(&cfg),
            })
        })
        .collect::<Result<_, ApiError>>()?;
    let defaults = SimConfig::default();
    let parameters = SCHEMA
        .iter()
        .map(|s| ParamEntry {
            spec: s.clone(),
            default: defaults.get(s.key).unwrap_or_default(),
        })
        .collect();
    Ok(PresetCatalog { presets, parameters })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeRequest {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
    #[serde(default)]
    pub n_cycles: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Cap on returned waveform length; statistics use the full signal.
    #[serde(default)]
    pub max_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdPayload {
    pub freq: Vec<f64>,
    pub db: Vec<f64>,
}

impl From<PsdCurve> for PsdPayload {
    fn from(p: PsdCurve) -> Self {
        Self { freq: p.freq, db: p.db }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizeResponse {
    pub fs: f64,
    /// Full length before truncation.
    pub n_samples: usize,
    pub truncated: bool,
    pub mixture: Vec<f64>,
    pub envelope: Vec<f64>,
    pub psd: PsdPayload,
    /// Background-noise component alone; absent when noise is off.
    pub noise_psd: Option<PsdPayload>,
    /// Cycle-averaged envelope ACF; absent when too few cycles segment.
    pub acf: Option<AcfCurve>,
    pub annotations: Annotations,
    pub config_ini: String,
    pub warnings: Vec<String>,
}

fn value_text(key: &str, v: &Value) -> Result<String, ApiError> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Array(items) => {
            let parts = items
                .iter()
                .map(|i| match i {
                    Value::Number(n) => Ok(n.to_string()),
                    _ => Err(ApiError::invalid(key, format!("`{key}`: list items must be numbers"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(format!("({})", parts.join(", ")))
        }
        Value::Null | Value::Object(_) => Err(ApiError::invalid(key, format!("`{key}`: unsupported value {v}"))),
    }
}

/// Preset plus overrides, range-checked strictly.
pub fn request_config(req: &SynthesizeRequest) -> Result<(SimConfig, Vec<String>), ApiError> {
    let name = req.preset.as_deref().unwrap_or("normal");
    let base = config::preset_config(name).map_err(|_| ApiError::invalid("preset", format!("unknown preset `{name}`")))?;
    let mut pairs = Vec::with_capacity(req.overrides.len());
    for (k, v) in &req.overrides {
        if config::spec(k).is_none() {
            return Err(ApiError::invalid(k.clone(), format!("unknown parameter `{k}`")));
        }
        pairs.push((k.clone(), value_text(k, v)?));
    }
    let mut loaded = config::apply_overrides(base, pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())), true)
        .map_err(ApiError::from_error)?;
    if let Some(n) = req.n_cycles {
        if n == 0 || n > MAX_CYCLES {
            return Err(ApiError::invalid("n_cycles", format!("n_cycles must be in 1..={MAX_CYCLES}")));
        }
        loaded.config.cycles_per_sample = n;
    }
    if let Some(seed) = req.seed {
        loaded.config.seed = seed;
    }
    Ok((loaded.config, loaded.warnings))
}

/// PSD with the segment shortened to fit short signals.
fn psd_for(x: &[f64], fs: f64, cfg: &PreprocConfig) -> Option<PsdCurve> {
    let want = (cfg.welch_seg * fs).round() as usize;
    let seg = want.min(x.len());
    if seg < 16 {
        return None;
    }
    let overlap = ((seg as f64) * cfg.welch_overlap).round() as usize;
    analysis::psd_db(x, fs, seg, overlap.min(seg - 1)).ok()
}

pub fn synthesize(req: &SynthesizeRequest) -> Result<SynthesizeResponse, ApiError> {
    let max_seconds = req.max_seconds.unwrap_or(DEFAULT_MAX_SECONDS);
    if !(max_seconds > 0.0 && max_seconds.is_finite()) {
        return Err(ApiError::invalid("max_seconds", "max_seconds must be > 0"));
    }
    let (cfg, mut warnings) = request_config(req)?;
    let rec = simulate(&cfg, cfg.seed).map_err(ApiError::from_error)?;
    let pre_cfg = PreprocConfig::default();
    let fs = rec.mixture.fs;
    let envelope = analysis::preprocess_envelope(&rec.mixture, &pre_cfg)
        .map_err(|e| ApiError::from_error(e).with_stage("envelope"))?;
    let acf = match analysis::analyze(&rec.mixture, &pre_cfg) {
        Ok(a) => Some(a.acf),
        Err(e) => {
            warnings.push(format!("no ACF: {e}"));
            None
        }
    };
    let psd = psd_for(&rec.mixture.samples, fs, &pre_cfg)
        .ok_or_else(|| ApiError::invalid("n_cycles", "recording too short for a spectrum"))?;
    let noise_psd = (rec.annotations.sigma_n > 0.0)
        .then(|| psd_for(&rec.components.noise.samples, fs, &pre_cfg))
        .flatten()
        .map(PsdPayload::from);
    let n = rec.mixture.len();
    let cap = ((max_seconds * fs).floor() as usize).min(n);
    Ok(SynthesizeResponse {
        fs,
        n_samples: n,
        truncated: cap < n,
        mixture: rec.mixture.samples[..cap].to_vec(),
        envelope: envelope.samples[..cap].to_vec(),
        psd: psd.into(),
        noise_psd,
        acf,
        annotations: rec.annotations,
        config_ini: cfg.to_ini(),
        warnings,
    })
}

impl ApiError {
    fn with_stage(mut self, stage: &str) -> Self {
        self.stage.get_or_insert_with(|| stage.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPayload {
    pub fs: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRequest {
    pub real: SignalPayload,
    /// Recording to compare against; when absent one is synthesized from
    /// `synth`.
    #[serde(default)]
    pub sim: Option<SignalPayload>,
    #[serde(default)]
    pub synth: Option<SynthesizeRequest>,
}

pub fn validate(req: &ValidateRequest) -> Result<ComparisonReport, ApiError> {
    let real = Signal::new(req.real.samples.clone(), req.real.fs).map_err(|e| ApiError::invalid("real", e.to_string()))?;
    let sim = match (&req.sim, &req.synth) {
        (Some(s), _) => Signal::new(s.samples.clone(), s.fs).map_err(|e| ApiError::invalid("sim", e.to_string()))?,
        (None, Some(synth)) => {
            let (cfg, _) = request_config(synth)?;
            simulate(&cfg, cfg.seed).map_err(ApiError::from_error)?.mixture
        }
        (None, None) => return Err(ApiError::bad_request("one of `sim` or `synth` is required")),
    };
    analysis::compare_stats(&real, &sim, &PreprocConfig::default()).map_err(ApiError::from_error)
}

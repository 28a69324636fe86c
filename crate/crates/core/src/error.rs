use std::path::PathBuf;

/// Errors produced anywhere in the simulation, analysis and calibration chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("sampling rate {fs} Hz is too low for a {f0} Hz carrier (need fs >= 4*f0)")]
    Aliasing { f0: f64, fs: f64 },

    #[error("cycle {cycle}: systolic interval {delta_t} s does not fit inside RR {rr} s")]
    CycleGeometry { cycle: usize, delta_t: f64, rr: f64 },

    #[error("impulse response horizon {horizon} s is shorter than 8 decay constants ({needed} s)")]
    Truncation { horizon: f64, needed: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("sampling rates differ: {0} Hz vs {1} Hz")]
    FsMismatch(f64, f64),

    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),

    #[error("SNR is undefined for a silent cardiac component")]
    SnrUndefined,

    #[error("band {lo}-{hi} Hz is infeasible at fs = {fs} Hz; lower the upper band edge below {nyquist} Hz")]
    BandInfeasible { lo: f64, hi: f64, fs: f64, nyquist: f64 },

    #[error("signal too short: {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },

    #[error("no periodicity found in the plausible heart-rate range (best normalized ACF {best:.3})")]
    NoPeriodicity { best: f64 },

    #[error("segmentation failed: {0}")]
    Segmentation(String),

    #[error("prior is mis-specified: {0}")]
    MisspecifiedPrior(String),

    #[error("sampler diagnostics: {0}")]
    Diagnostics(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Name of the pipeline stage that failed, if this error carries one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

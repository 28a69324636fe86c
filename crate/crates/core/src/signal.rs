use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly sampled real waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::param("fs", format!("must be positive, got {fs}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("samples", format!("non-finite value at index {i}")));
        }
        Ok(Self { samples, fs })
    }

    pub fn zeros(len: usize, fs: f64) -> Self {
        Self {
            samples: vec![0.0; len],
            fs,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn scaled(&self, gain: f64) -> Signal {
        Signal {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            fs: self.fs,
        }
    }

    /// Elementwise sum. Both signals must share `fs` and length.
    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.check_compatible(other)?;
        Ok(Signal {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            fs: self.fs,
        })
    }

    pub fn check_compatible(&self, other: &Signal) -> Result<()> {
        if self.fs != other.fs {
            return Err(Error::FsMismatch(self.fs, other.fs));
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(())
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

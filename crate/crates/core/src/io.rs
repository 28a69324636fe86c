//! Waveform export and ingestion.
//!
//! Recordings are written as mono WAV (32-bit float by default) or CSV with
//! one column per component, plus a JSON sidecar holding the annotations
//! and an INI snapshot of the configuration. Ingestion reads WAV or
//! single-column / time-value CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::resample::resample;
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::simulate::{Annotations, Recording};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavSample {
    #[default]
    Float32,
    /// Peak-normalized 16-bit PCM.
    Pcm16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Wav(WavSample),
    Csv,
}

/// Sidecar contents: ground truth plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub annotations: Annotations,
    pub config_ini: String,
    /// Gain applied before PCM quantization (1 for float output).
    pub pcm_gain: f64,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn wav_err(path: &Path, source: hound::Error) -> Error {
    Error::Wav {
        path: path.to_path_buf(),
        source,
    }
}

/// Write one mono channel. Returns the gain applied to the samples (only
/// PCM output is rescaled).
pub fn write_wav(path: &Path, x: &Signal, sample: WavSample) -> Result<f64> {
    let fs = x.fs.round();
    if (fs - x.fs).abs() > 1e-9 || fs < 1.0 || fs > u32::MAX as f64 {
        return Err(Error::Format(format!("WAV needs an integer sampling rate, got {}", x.fs)));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs as u32,
        bits_per_sample: match sample {
            WavSample::Float32 => 32,
            WavSample::Pcm16 => 16,
        },
        sample_format: match sample {
            WavSample::Float32 => hound::SampleFormat::Float,
            WavSample::Pcm16 => hound::SampleFormat::Int,
        },
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    let gain = match sample {
        WavSample::Float32 => {
            for v in &x.samples {
                w.write_sample(*v as f32).map_err(|e| wav_err(path, e))?;
            }
            1.0
        }
        WavSample::Pcm16 => {
            let peak = x.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gain = if peak > 0.0 { 0.999 * i16::MAX as f64 / peak } else { 1.0 };
            for v in &x.samples {
                w.write_sample((v * gain).round() as i16).map_err(|e| wav_err(path, e))?;
            }
            gain
        }
    };
    w.finalize().map_err(|e| wav_err(path, e))?;
    Ok(gain)
}

/// `time,mixture,<components...>` with a `# fs=` comment line first.
pub fn recording_csv(rec: &Recording) -> String {
    let c = &rec.components;
    let cols: [(&str, &[f64]); 9] = [
        ("mixture", &rec.mixture.samples),
        ("fetal_clean", &c.fetal_clean.samples),
        ("maternal_clean", &c.maternal_clean.samples),
        ("cardiac_propagated", &c.cardiac_propagated.samples),
        ("uc_envelope", &c.uc_envelope.samples),
        ("cardiac", &c.cardiac.samples),
        ("noise", &c.noise.samples),
        ("movement", &c.movement.samples),
        ("uc_noise", &c.uc_noise.samples),
    ];
    let fs = rec.mixture.fs;
    let mut s = format!("# fs={fs}\ntime");
    for (name, _) in &cols {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for i in 0..rec.mixture.len() {
        s.push_str(&(i as f64 / fs).to_string());
        for (_, col) in &cols {
            s.push(',');
            s.push_str(&col[i].to_string());
        }
        s.push('\n');
    }
    s
}

/// Write `<stem>.wav` or `<stem>.csv` plus `<stem>.json` into `dir`.
/// Returns the written paths, waveform first.
pub fn export(rec: &Recording, format: ExportFormat, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let (wave, gain) = match format {
        ExportFormat::Wav(sample) => {
            let p = dir.join(format!("{stem}.wav"));
            let g = write_wav(&p, &rec.mixture, sample)?;
            (p, g)
        }
        ExportFormat::Csv => {
            let p = dir.join(format!("{stem}.csv"));
            fs::write(&p, recording_csv(rec)).map_err(|e| io_err(&p, e))?;
            (p, 1.0)
        }
    };
    let side = dir.join(format!("{stem}.json"));
    let sidecar = Sidecar {
        annotations: rec.annotations.clone(),
        config_ini: rec.config.to_ini(),
        pcm_gain: gain,
    };
    fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| io_err(&side, e))?;
    Ok(vec![wave, side])
}

/// Per-component float WAVs named `<stem>_<component>.wav`.
pub fn export_components(rec: &Recording, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let c = &rec.components;
    let parts = [
        ("fetal_clean", &c.fetal_clean),
        ("maternal_clean", &c.maternal_clean),
        ("cardiac", &c.cardiac),
        ("noise", &c.noise),
        ("movement", &c.movement),
        ("uc_noise", &c.uc_noise),
    ];
    let mut out = Vec::new();
    for (name, sig) in parts {
        let p = dir.join(format!("{stem}_{name}.wav"));
        write_wav(&p, sig, WavSample::Float32)?;
        out.push(p);
    }
    Ok(out)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Load a WAV (any channel count, first channel kept) or CSV recording.
///
/// CSV may carry a `# fs=<Hz>` comment, a `time` first column (fs derived
/// from the spacing), or rely on `fs_hint`. With `target_fs` the signal is
/// resampled after loading.
pub fn ingest_recording(path: &Path, fs_hint: Option<f64>, target_fs: Option<f64>) -> Result<Signal> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let sig = match ext.as_str() {
        "wav" => read_wav(path)?,
        "csv" | "txt" => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_csv(&text, fs_hint).map_err(|e| match e {
                Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        _ => {
            return Err(Error::Format(format!(
                "{}: unsupported recording format (expected .wav or .csv)",
                path.display()
            )))
        }
    };
    match target_fs {
        Some(fs) if (fs - sig.fs).abs() > 1e-9 => resample(&sig, fs),
        _ => Ok(sig),
    }
}

fn read_wav(path: &Path) -> Result<Signal> {
    let mut r = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = r.spec();
    let ch = spec.channels.max(1) as usize;
    let raw: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(i32::from(spec.bits_per_sample) - 1);
            r.samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| wav_err(path, e))?
        }
    };
    let samples = raw.into_iter().step_by(ch).collect();
    Signal::new(samples, f64::from(spec.sample_rate))
}

/// Parse CSV text: optional `# fs=` line, optional header row, then either
/// one value per row or `time,value[,...]` rows (second column used).
pub fn parse_csv(text: &str, fs_hint: Option<f64>) -> Result<Signal> {
    let mut fs_header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut header: Option<Vec<String>> = None;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("fs=") {
                fs_header = Some(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Format(format!("line {}: bad fs value {v:?}", k + 1)))?,
                );
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match cells.iter().map(|c| c.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
            Ok(v) => rows.push(v),
            Err(_) if rows.is_empty() && header.is_none() => {
                header = Some(cells.iter().map(|c| c.to_ascii_lowercase()).collect());
            }
            Err(_) => return Err(Error::Format(format!("line {}: non-numeric value", k + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Format("no samples".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Format("rows have differing column counts".into()));
    }
    let has_time = width >= 2 && header.as_ref().is_none_or(|h| h[0].starts_with('t'));
    let col = usize::from(has_time);
    let samples: Vec<f64> = rows.iter().map(|r| r[col]).collect();
    let fs = if let Some(fs) = fs_header {
        fs
    } else if has_time && rows.len() >= 2 {
        let span = rows[rows.len() - 1][0] - rows[0][0];
        if !(span > 0.0) {
            return Err(Error::Format("time column is not increasing".into()));
        }
        (rows.len() - 1) as f64 / span
    } else {
        fs_hint.ok_or_else(|| Error::Format("sampling rate unknown: add a '# fs=' line, a time column or a hint".into()))?
    };
    Signal::new(samples, fs)
}

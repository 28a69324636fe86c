//! Welch averaged-periodogram PSD (Hann window, one-sided density).

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WelchEstimate {
    pub freq: Vec<f64>,
    /// Mean of the segment periodograms, power per Hz.
    pub psd: Vec<f64>,
    /// Per-segment periodograms.
    pub segments: Vec<Vec<f64>>,
}

pub fn hann(len: usize) -> Vec<f64> {
    // periodic Hann, as used for spectral estimation
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Welch estimate with segment length `seg_len` and `overlap` samples of
/// overlap between neighbours. Each segment is mean-detrended.
pub fn welch(x: &[f64], fs: f64, seg_len: usize, overlap: usize) -> Result<WelchEstimate> {
    if seg_len < 2 {
        return Err(Error::param("seg_len", "must be >= 2"));
    }
    if seg_len > x.len() {
        return Err(Error::TooShort {
            got: x.len(),
            need: seg_len,
        });
    }
    if overlap >= seg_len {
        return Err(Error::param("overlap", "must be smaller than seg_len"));
    }
    let step = seg_len - overlap;
    let window = hann(seg_len);
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (fs * wss);
    let n_bins = seg_len / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(seg_len);

    let mut segments = Vec::new();
    let mut start = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg_len];
    while start + seg_len <= x.len() {
        let seg = &x[start..start + seg_len];
        let mean = seg.iter().sum::<f64>() / seg_len as f64;
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        let p: Vec<f64> = (0..n_bins)
            .map(|k| {
                let one_sided = if k == 0 || (seg_len % 2 == 0 && k == seg_len / 2) {
                    1.0
                } else {
                    2.0
                };
                buf[k].norm_sqr() * scale * one_sided
            })
            .collect();
        segments.push(p);
        start += step;
    }
    let count = segments.len() as f64;
    let psd = (0..n_bins)
        .map(|k| segments.iter().map(|s| s[k]).sum::<f64>() / count)
        .collect();
    let freq = (0..n_bins).map(|k| k as f64 * fs / seg_len as f64).collect();
    Ok(WelchEstimate {
        freq,
        psd,
        segments,
    })
}

pub(crate) fn to_db(p: f64) -> f64 {
    10.0 * p.max(1e-30).log10()
}

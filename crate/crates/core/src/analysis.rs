//! Preprocessing and evaluation statistics shared by real and simulated
//! recordings: band-pass, Hilbert envelope, period estimate, cycle
//! segmentation, cycle-averaged ACF, dB-domain Welch PSD and a scalar
//! comparison report.
//!
//! Every statistic goes through [`preprocess`], so both sides of a
//! comparison see identical filters.

use serde::{Deserialize, Serialize};

use crate::dsp::fft::{analytic_magnitude, autocorrelation};
use crate::dsp::filter::{butter_bandpass, butter_lowpass, sosfiltfilt};
use crate::dsp::resample::resample;
use crate::dsp::welch::{to_db, welch};
use crate::error::{Error, Result, StageExt};
use crate::signal::{mean, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocConfig {
    pub band: (f64, f64),
    /// Prototype order of the band-pass (the band-pass has twice as many poles).
    pub band_order: usize,
    /// Envelope smoothing cutoff, Hz.
    pub env_lp: f64,
    pub env_lp_order: usize,
    /// Heart-rate search range, bpm.
    pub fhr_search: (f64, f64),
    /// Accepted cycle lengths, seconds.
    pub rr_plausible: (f64, f64),
    /// Minimum peak spacing as a fraction of the period.
    pub peak_distance: f64,
    /// Onset threshold as a fraction of the peak height above the local floor.
    pub onset_fraction: f64,
    /// Smallest normalized ACF value accepted as periodicity.
    pub acf_threshold: f64,
    /// Welch segment length, seconds.
    pub welch_seg: f64,
    /// Welch overlap fraction.
    pub welch_overlap: f64,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            band: (20.0, 150.0),
            band_order: 4,
            env_lp: 8.0,
            env_lp_order: 4,
            fhr_search: (80.0, 200.0),
            rr_plausible: (0.25, 0.90),
            peak_distance: 0.7,
            onset_fraction: 0.4,
            acf_threshold: 0.1,
            welch_seg: 2.0,
            welch_overlap: 0.5,
        }
    }
}

impl PreprocConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::param("band", format!("need 0 < lo < hi, got ({lo}, {hi})")));
        }
        let (f_lo, f_hi) = self.fhr_search;
        if !(f_lo > 0.0 && f_lo < f_hi) {
            return Err(Error::param("fhr_search", "need 0 < lo < hi"));
        }
        let (r_lo, r_hi) = self.rr_plausible;
        if !(r_lo > 0.0 && r_lo < r_hi) {
            return Err(Error::param("rr_plausible", "need 0 < lo < hi"));
        }
        if !(self.env_lp > 0.0) || self.band_order == 0 || self.env_lp_order == 0 {
            return Err(Error::param("env_lp", "cutoff and orders must be positive"));
        }
        if !(self.peak_distance > 0.0 && self.peak_distance < 1.0) {
            return Err(Error::param("peak_distance", "must lie in (0, 1)"));
        }
        if !(self.onset_fraction > 0.0 && self.onset_fraction < 1.0) {
            return Err(Error::param("onset_fraction", "must lie in (0, 1)"));
        }
        if !(self.welch_seg > 0.0 && (0.0..1.0).contains(&self.welch_overlap)) {
            return Err(Error::param("welch", "segment must be > 0 and overlap in [0, 1)"));
        }
        Ok(())
    }

    /// Band actually used at `fs`. An upper edge above `0.45 fs` but below
    /// Nyquist is pulled down to `0.45 fs`; an edge at or above Nyquist is
    /// an error.
    pub fn effective_band(&self, fs: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.band;
        let nyquist = fs / 2.0;
        if hi >= nyquist {
            return Err(Error::BandInfeasible { lo, hi, fs, nyquist });
        }
        let limit = 0.45 * fs;
        let hi_eff = if hi > limit {
            log::warn!("upper band edge {hi} Hz clamped to {limit:.2} Hz at fs = {fs} Hz");
            limit
        } else {
            hi
        };
        if lo >= hi_eff {
            return Err(Error::BandInfeasible { lo, hi, fs, nyquist });
        }
        Ok((lo, hi_eff))
    }

    fn welch_lengths(&self, fs: f64) -> (usize, usize) {
        let seg = (self.welch_seg * fs).round() as usize;
        let overlap = (seg as f64 * self.welch_overlap).round() as usize;
        (seg, overlap.min(seg.saturating_sub(1)))
    }
}

/// Output of the shared preprocessing chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub bandpassed: Signal,
    /// Smoothed Hilbert envelope scaled to a maximum of 1.
    pub envelope: Signal,
    /// Unsmoothed Hilbert magnitude on the same scale, used to place onsets.
    pub detail: Signal,
}

/// Zero-phase band-pass at the effective band.
pub fn bandpass(x: &Signal, cfg: &PreprocConfig) -> Result<Signal> {
    cfg.validate()?;
    let (lo, hi) = cfg.effective_band(x.fs)?;
    let sos = butter_bandpass(cfg.band_order, lo, hi, x.fs)?;
    Signal::new(sosfiltfilt(&sos, &x.samples), x.fs)
}

/// Band-pass, Hilbert magnitude, envelope low-pass, max normalization.
pub fn preprocess(x: &Signal, cfg: &PreprocConfig) -> Result<Preprocessed> {
    let bandpassed = bandpass(x, cfg)?;
    let lp = butter_lowpass(cfg.env_lp_order, cfg.env_lp, x.fs)?;
    let mut detail = analytic_magnitude(&bandpassed.samples);
    let mut env = sosfiltfilt(&lp, &detail);
    let peak = env.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in env.iter_mut().chain(detail.iter_mut()) {
            *v /= peak;
        }
    }
    Ok(Preprocessed {
        bandpassed,
        envelope: Signal::new(env, x.fs)?,
        detail: Signal::new(detail, x.fs)?,
    })
}

pub fn preprocess_envelope(x: &Signal, cfg: &PreprocConfig) -> Result<Signal> {
    Ok(preprocess(x, cfg)?.envelope)
}

/// Dominant cardiac period from the envelope autocorrelation, searched
/// over the configured heart-rate range.
pub fn estimate_period(env: &Signal, cfg: &PreprocConfig) -> Result<f64> {
    cfg.validate()?;
    let fs = env.fs;
    let max_lag = ((60.0 / cfg.fhr_search.0) * fs).round() as usize;
    let min_lag = ((60.0 / cfg.fhr_search.1) * fs).round() as usize;
    let need = 2 * max_lag;
    if env.len() < need {
        return Err(Error::TooShort {
            got: env.len(),
            need,
        });
    }
    let m = mean(&env.samples);
    let centered: Vec<f64> = env.samples.iter().map(|v| v - m).collect();
    let r = autocorrelation(&centered);
    if !(r[0] > 0.0) {
        return Err(Error::NoPeriodicity { best: 0.0 });
    }
    let mut best: Option<(usize, f64)> = None;
    for lag in min_lag.max(1)..=max_lag.min(r.len() - 2) {
        let v = r[lag] / r[0];
        let is_peak = r[lag] >= r[lag - 1] && r[lag] > r[lag + 1];
        if is_peak && best.is_none_or(|(_, b)| v > b) {
            best = Some((lag, v));
        }
    }
    match best {
        Some((lag, v)) if v >= cfg.acf_threshold => Ok(lag as f64 / fs),
        Some((_, v)) => Err(Error::NoPeriodicity { best: v }),
        None => {
            let v = (min_lag..=max_lag.min(r.len() - 1))
                .map(|l| r[l] / r[0])
                .fold(f64::NEG_INFINITY, f64::max);
            Err(Error::NoPeriodicity { best: v })
        }
    }
}

/// Segmented cycles of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSet {
    /// Zero-mean, max-normalized envelope segments of retained cycles.
    pub cycles: Vec<Vec<f64>>,
    /// `(start, end)` sample indices of retained cycles.
    pub spans: Vec<(usize, usize)>,
    /// All refined onsets, in samples, including those of discarded cycles.
    pub onsets: Vec<usize>,
    /// Envelope peak index matching each onset.
    pub peaks: Vec<usize>,
    pub t0: f64,
    pub fs: f64,
}

impl CycleSet {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn onset_times(&self) -> Vec<f64> {
        self.onsets.iter().map(|o| *o as f64 / self.fs).collect()
    }

    /// Cut `x` at the retained spans and zero-mean normalize each piece.
    pub fn slice(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.spans
            .iter()
            .map(|&(a, b)| normalize_cycle(&x[a.min(x.len())..b.min(x.len())]))
            .collect()
    }

    /// Raw (unnormalized) pieces of `x` at the retained spans.
    pub fn slice_raw<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        self.spans
            .iter()
            .map(|&(a, b)| &x[a.min(x.len())..b.min(x.len())])
            .collect()
    }
}

/// Subtract the mean and divide by the largest absolute value.
pub fn normalize_cycle(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let peak = centered.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        centered.iter().map(|v| v / peak).collect()
    } else {
        centered
    }
}

fn local_maxima(x: &[f64], floor: f64) -> Vec<usize> {
    (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] >= floor)
        .collect()
}

/// Greedy peak picking: tallest first, dropping any candidate closer than
/// `min_dist` samples to an accepted peak.
pub fn pick_peaks(x: &[f64], min_dist: usize, floor: f64) -> Vec<usize> {
    let mut cand = local_maxima(x, floor);
    cand.sort_by(|a, b| x[*b].partial_cmp(&x[*a]).unwrap().then(a.cmp(b)));
    let mut taken: Vec<usize> = Vec::new();
    for c in cand {
        if taken.iter().all(|t| t.abs_diff(c) >= min_dist) {
            taken.push(c);
        }
    }
    taken.sort_unstable();
    taken
}

/// Beat onsets. Peaks are picked on the smoothed envelope at least
/// `peak_distance * T0` apart; each onset is then placed on the unsmoothed
/// envelope by walking back from the local maximum near the peak to the
/// last sample above `floor + onset_fraction * (height - floor)`, where the
/// floor is the minimum over the preceding `peak_distance * T0`.
pub fn segment_cycles(pre: &Preprocessed, t0: f64, cfg: &PreprocConfig) -> Result<CycleSet> {
    cfg.validate()?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::param("T0", "period must be > 0"));
    }
    let fs = pre.envelope.fs;
    let x = &pre.envelope.samples;
    let d = &pre.detail.samples;
    if d.len() != x.len() {
        return Err(Error::LengthMismatch(x.len(), d.len()));
    }
    let min_dist = ((cfg.peak_distance * t0 * fs).round() as usize).max(1);
    let top = x.iter().cloned().fold(0.0f64, f64::max);
    let peaks = pick_peaks(x, min_dist, 0.05 * top);
    let before = (0.25 * t0 * fs).round() as usize;
    let after = (0.1 * t0 * fs).round() as usize;
    let mut onsets = Vec::with_capacity(peaks.len());
    for &p in &peaks {
        let lo = p.saturating_sub(before);
        let hi = (p + after).min(d.len() - 1);
        let q = (lo..=hi).fold(lo, |m, i| if d[i] > d[m] { i } else { m });
        let w0 = q.saturating_sub(min_dist);
        let floor = d[w0..=q].iter().cloned().fold(f64::INFINITY, f64::min);
        let thr = floor + cfg.onset_fraction * (d[q] - floor);
        let mut i = q;
        while i > w0 && d[i] > thr {
            i -= 1;
        }
        onsets.push(i);
    }
    let (rr_lo, rr_hi) = cfg.rr_plausible;
    let mut spans = Vec::new();
    for w in onsets.windows(2) {
        let rr = w[1].saturating_sub(w[0]) as f64 / fs;
        if rr > rr_lo && rr < rr_hi {
            spans.push((w[0], w[1]));
        }
    }
    if spans.len() < 2 {
        return Err(Error::Segmentation(format!(
            "{} plausible cycles found (need at least 2) among {} peaks",
            spans.len(),
            peaks.len()
        )));
    }
    let cycles = spans.iter().map(|&(a, b)| normalize_cycle(&x[a..b])).collect();
    Ok(CycleSet {
        cycles,
        spans,
        onsets,
        peaks,
        t0,
        fs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    /// Lag in seconds.
    pub lag: Vec<f64>,
    pub value: Vec<f64>,
}

/// Per-cycle biased ACF normalized to 1 at lag 0, truncated to the
/// shortest cycle and averaged.
pub fn cycle_averaged_acf(cycles: &[Vec<f64>], fs: f64) -> Result<AcfCurve> {
    if cycles.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "cycle-averaged ACF needs at least 2 cycles, got {}",
            cycles.len()
        )));
    }
    let min_len = cycles.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut acc = vec![0.0; min_len];
    let mut used = 0usize;
    for c in cycles {
        let r = autocorrelation(c);
        if r.is_empty() || !(r[0] > 0.0) {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(&r) {
            *a += v / r[0];
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientData("every cycle is silent".into()));
    }
    let value: Vec<f64> = acc.iter().map(|v| (v / used as f64).clamp(-1.0, 1.0)).collect();
    let lag = (0..value.len()).map(|k| k as f64 / fs).collect();
    Ok(AcfCurve { lag, value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdCurve {
    pub freq: Vec<f64>,
    pub db: Vec<f64>,
    /// Spread of the per-segment estimates, dB.
    pub db_std: Vec<f64>,
}

/// Welch PSD in dB of the band-passed, RMS-normalized input.
pub fn welch_psd_db(x: &Signal, cfg: &PreprocConfig, seg_len: usize, overlap: usize) -> Result<PsdCurve> {
    let bp = bandpass(x, cfg)?;
    let r = bp.rms();
    let normalized: Vec<f64> = if r > 0.0 {
        bp.samples.iter().map(|v| v / r).collect()
    } else {
        bp.samples
    };
    psd_db(&normalized, x.fs, seg_len, overlap)
}

/// Welch PSD in dB of `x` as given.
pub fn psd_db(x: &[f64], fs: f64, seg_len: usize, overlap: usize) -> Result<PsdCurve> {
    let w = welch(x, fs, seg_len, overlap)?;
    let db: Vec<f64> = w.psd.iter().map(|p| to_db(*p)).collect();
    let n = w.segments.len() as f64;
    let db_std = (0..w.freq.len())
        .map(|k| {
            let vals: Vec<f64> = w.segments.iter().map(|s| to_db(s[k])).collect();
            let m = vals.iter().sum::<f64>() / n;
            (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    Ok(PsdCurve {
        freq: w.freq,
        db,
        db_std,
    })
}

/// Welch PSD with the configured segment length (shortened to the record
/// when the record is shorter).
pub fn default_psd_db(x: &Signal, cfg: &PreprocConfig) -> Result<PsdCurve> {
    let (seg, overlap) = cfg.welch_lengths(x.fs);
    let seg = seg.min(x.len());
    let overlap = overlap.min(seg.saturating_sub(1));
    welch_psd_db(x, cfg, seg, overlap)
}

/// All statistics of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub pre: Preprocessed,
    pub t0: f64,
    pub cycles: CycleSet,
    pub acf: AcfCurve,
    pub psd: PsdCurve,
}

pub fn analyze(x: &Signal, cfg: &PreprocConfig) -> Result<Analysis> {
    let pre = preprocess(x, cfg).stage("preprocess")?;
    let t0 = estimate_period(&pre.envelope, cfg).stage("period")?;
    let cycles = segment_cycles(&pre, t0, cfg).stage("segmentation")?;
    let acf = cycle_averaged_acf(&cycles.cycles, x.fs).stage("acf")?;
    let psd = default_psd_db(x, cfg).stage("psd")?;
    Ok(Analysis {
        pre,
        t0,
        cycles,
        acf,
        psd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub acf_rmse: f64,
    pub psd_rmse_db: f64,
    pub envelope_corr: f64,
    pub fs: f64,
    pub band: (f64, f64),
    pub t0_real: f64,
    pub t0_sim: f64,
    pub cycles_real: usize,
    pub cycles_sim: usize,
    pub acf_real: AcfCurve,
    pub acf_sim: AcfCurve,
    pub psd_real: PsdCurve,
    pub psd_sim: PsdCurve,
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return f64::NAN;
    }
    (a.iter().zip(b).take(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64).sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Largest Pearson correlation of `a` and `b` over relative shifts of up
/// to `max_shift` samples.
pub fn max_shifted_correlation(a: &[f64], b: &[f64], max_shift: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for s in -(max_shift as isize)..=max_shift as isize {
        let (xa, xb) = if s >= 0 {
            let s = s as usize;
            if s >= a.len() {
                continue;
            }
            (&a[s..], b)
        } else {
            let s = (-s) as usize;
            if s >= b.len() {
                continue;
            }
            (a, &b[s..])
        };
        let n = xa.len().min(xb.len());
        if n < 2 {
            continue;
        }
        best = best.max(pearson(&xa[..n], &xb[..n]));
    }
    best
}

/// Run the shared chain on both recordings and summarize their agreement.
/// `sim` is resampled to the rate of `real` when they differ.
pub fn compare_stats(real: &Signal, sim: &Signal, cfg: &PreprocConfig) -> Result<ComparisonReport> {
    let sim = if sim.fs != real.fs {
        resample(sim, real.fs).stage("sim")?
    } else {
        sim.clone()
    };
    let band = cfg.effective_band(real.fs)?;
    let a = analyze(real, cfg).stage("real")?;
    let b = analyze(&sim, cfg).stage("sim")?;
    let acf_rmse = rmse(&a.acf.value, &b.acf.value);
    let in_band: Vec<usize> = a
        .psd
        .freq
        .iter()
        .enumerate()
        .filter(|(_, f)| **f >= band.0 && **f <= band.1)
        .map(|(k, _)| k)
        .collect();
    let psd_rmse_db = if a.psd.freq == b.psd.freq && !in_band.is_empty() {
        let da: Vec<f64> = in_band.iter().map(|&k| a.psd.db[k]).collect();
        let db: Vec<f64> = in_band.iter().map(|&k| b.psd.db[k]).collect();
        rmse(&da, &db)
    } else {
        // different record lengths give different grids; compare on the
        // coarser one by nearest bin
        let (coarse, fine) = if a.psd.freq.len() <= b.psd.freq.len() {
            (&a.psd, &b.psd)
        } else {
            (&b.psd, &a.psd)
        };
        let df = fine.freq.get(1).copied().unwrap_or(1.0);
        let pairs: Vec<(f64, f64)> = coarse
            .freq
            .iter()
            .zip(&coarse.db)
            .filter(|(f, _)| **f >= band.0 && **f <= band.1)
            .filter_map(|(f, d)| {
                let k = (f / df).round() as usize;
                fine.db.get(k).map(|v| (*d, *v))
            })
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        rmse(&x, &y)
    };
    let shift = (a.t0 / 2.0 * real.fs).round() as usize;
    let envelope_corr = max_shifted_correlation(&a.pre.envelope.samples, &b.pre.envelope.samples, shift);
    Ok(ComparisonReport {
        acf_rmse,
        psd_rmse_db,
        envelope_corr,
        fs: real.fs,
        band,
        t0_real: a.t0,
        t0_sim: b.t0,
        cycles_real: a.cycles.len(),
        cycles_sim: b.cycles.len(),
        acf_real: a.acf,
        acf_sim: b.acf,
        psd_real: a.psd,
        psd_sim: b.psd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(f: f64, fs: f64, n: usize, amp: f64) -> Signal {
        Signal::new((0..n).map(|i| amp * (2.0 * PI * f * i as f64 / fs).sin()).collect(), fs).unwrap()
    }

    #[test]
    fn band_clamp_and_infeasible() {
        let cfg = PreprocConfig::default();
        let (lo, hi) = cfg.effective_band(333.0).unwrap();
        assert_eq!(lo, 20.0);
        assert!((hi - 0.45 * 333.0).abs() < 1e-12);
        assert!(matches!(cfg.effective_band(250.0), Err(Error::BandInfeasible { .. })));
        assert_eq!(cfg.effective_band(1000.0).unwrap(), (20.0, 150.0));
    }

    #[test]
    fn tone_envelope_is_flat() {
        let cfg = PreprocConfig::default();
        let env = preprocess_envelope(&tone(60.0, 1000.0, 5000, 1.0), &cfg).unwrap();
        let mid = &env.samples[1000..4000];
        let (lo, hi) = mid.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!((hi - lo) / hi < 0.05, "{lo} {hi}");
    }

    #[test]
    fn silent_input_gives_silent_envelope() {
        let cfg = PreprocConfig::default();
        let env = preprocess_envelope(&Signal::zeros(2000, 1000.0), &cfg).unwrap();
        assert!(env.samples.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scale_invariant_envelope() {
        let cfg = PreprocConfig::default();
        let x = tone(60.0, 1000.0, 3000, 1.0);
        let a = preprocess_envelope(&x, &cfg).unwrap();
        let b = preprocess_envelope(&x.scaled(7.5), &cfg).unwrap();
        for (u, v) in a.samples.iter().zip(&b.samples) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn tone_psd_peak() {
        let cfg = PreprocConfig::default();
        let psd = welch_psd_db(&tone(50.0, 1000.0, 20000, 1.0), &cfg, 2000, 1000).unwrap();
        let k = psd
            .db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((psd.freq[k] - 50.0).abs() <= 0.5);
    }

    #[test]
    fn greedy_peaks_respect_distance() {
        let x = [0.0, 1.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.8, 0.0];
        assert_eq!(pick_peaks(&x, 3, 0.0), vec![1, 7]);
    }

    #[test]
    fn shifted_correlation_finds_lag() {
        let a: Vec<f64> = (0..400).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a[7..].to_vec();
        assert!(max_shifted_correlation(&a, &b, 10) > 0.9999);
    }
}

//! Per-cycle parameter fitting and summarization.
//!
//! Each cycle is fitted independently with a noiseless two-event model
//! (S1 at the cycle start, S2 `deltaT` later, fixed carriers and attack, no
//! transmission). The fitted set is then summarized as a Gaussian plus a
//! bounded sampling box, and Monte Carlo draws from the Gaussian feed the
//! corner-plot data.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix5, SymmetricEigen, Vector5};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, PreprocConfig};
use crate::dsp::fft::analytic_magnitude;
use crate::error::{Error, Result, StageExt};
use crate::heart::{CycleTheta, EventHyper, THETA_NAMES};
use crate::kernel::DEFAULT_DECAY_CONSTANTS;
use crate::sampler::{ParamBounds, DIM};
use crate::seed;
use crate::signal::Signal;

/// What the model is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitDomain {
    /// Zero-mean waveform; the model includes the carriers.
    #[default]
    Waveform,
    /// Amplitude envelope; the model is the sum of the two event envelopes.
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub domain: FitDomain,
    pub max_iter: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the step, relative to the bound widths, is below this.
    pub xtol: f64,
    /// Grid-search `deltaT` (with amplitudes solved linearly) before the
    /// local refinement. Guards against locking onto a neighbouring carrier
    /// period.
    pub scan_delta_t: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            domain: FitDomain::Waveform,
            max_iter: 500,
            ftol: 1e-8,
            xtol: 1e-10,
            scan_delta_t: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: CycleTheta,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
    pub cycle_index: usize,
}

/// Value and partial derivatives of one event at time `t`.
struct EventEval {
    value: f64,
    d_amp: f64,
    d_tau: f64,
    d_t: f64,
}

fn event_eval(t: f64, amp: f64, f0: f64, attack: f64, tau: f64, carrier: bool) -> EventEval {
    let end = attack + DEFAULT_DECAY_CONSTANTS * tau;
    if t < 0.0 || t >= end {
        return EventEval {
            value: 0.0,
            d_amp: 0.0,
            d_tau: 0.0,
            d_t: 0.0,
        };
    }
    let (e, de_dt, de_dtau) = if t < attack {
        (t / attack, 1.0 / attack, 0.0)
    } else {
        let e = (-(t - attack) / tau).exp();
        (e, -e / tau, e * (t - attack) / (tau * tau))
    };
    let (c, dc_dt) = if carrier {
        let w = 2.0 * PI * f0;
        ((w * t).sin(), w * (w * t).cos())
    } else {
        (1.0, 0.0)
    };
    EventEval {
        value: amp * c * e,
        d_amp: c * e,
        d_tau: amp * c * de_dtau,
        d_t: amp * (dc_dt * e + c * de_dt),
    }
}

/// Noiseless two-event cycle with a continuous S2 delay, sampled at `n/fs`.
pub fn cycle_model(theta: &CycleTheta, hyper: &EventHyper, fs: f64, len: usize, domain: FitDomain) -> Vec<f64> {
    let carrier = domain == FitDomain::Waveform;
    (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            event_eval(t, theta.a_s1, hyper.f0_s1, hyper.attack, theta.tau_s1, carrier).value
                + event_eval(t - theta.delta_t, theta.a_s2, hyper.f0_s2, hyper.attack, theta.tau_s2, carrier).value
        })
        .collect()
}

struct Problem<'a> {
    y: &'a [f64],
    fs: f64,
    hyper: &'a EventHyper,
    carrier: bool,
}

impl Problem<'_> {
    fn cost(&self, x: &[f64; DIM]) -> f64 {
        let mut c = 0.0;
        for (n, y) in self.y.iter().enumerate() {
            let t = n as f64 / self.fs;
            let m = event_eval(t, x[0], self.hyper.f0_s1, self.hyper.attack, x[2], self.carrier).value
                + event_eval(t - x[4], x[1], self.hyper.f0_s2, self.hyper.attack, x[3], self.carrier).value;
            c += (m - y) * (m - y);
        }
        c
    }

    /// Cost, gradient `J^T r` and Gauss-Newton matrix `J^T J`.
    fn linearize(&self, x: &[f64; DIM]) -> (f64, Vector5<f64>, Matrix5<f64>) {
        let mut cost = 0.0;
        let mut g = Vector5::zeros();
        let mut h = Matrix5::zeros();
        for (n, y) in self.y.iter().enumerate() {
            let t = n as f64 / self.fs;
            let s1 = event_eval(t, x[0], self.hyper.f0_s1, self.hyper.attack, x[2], self.carrier);
            let s2 = event_eval(t - x[4], x[1], self.hyper.f0_s2, self.hyper.attack, x[3], self.carrier);
            let r = s1.value + s2.value - y;
            let j = Vector5::new(s1.d_amp, s2.d_amp, s1.d_tau, s2.d_tau, -s2.d_t);
            cost += r * r;
            g += j * r;
            h.ger(1.0, &j, &j, 1.0);
        }
        (cost, g, h)
    }

    /// Best `deltaT` on a one-sample grid with both amplitudes solved by
    /// (clamped) linear least squares and the decays held at `x`.
    fn scan_delta_t(&self, x: &[f64; DIM], bounds: &ParamBounds) -> Option<([f64; DIM], f64)> {
        self.scan_delta_t_in(x, bounds, bounds.lower[4], bounds.upper[4])
    }

    fn scan_delta_t_in(&self, x: &[f64; DIM], bounds: &ParamBounds, lo: f64, hi: f64) -> Option<([f64; DIM], f64)> {
        let n = self.y.len();
        let hi = hi.min(bounds.upper[4]).min((n.saturating_sub(1)) as f64 / self.fs);
        let lo = lo.max(bounds.lower[4]);
        if hi < lo {
            return None;
        }
        let b1: Vec<f64> = (0..n)
            .map(|i| event_eval(i as f64 / self.fs, 1.0, self.hyper.f0_s1, self.hyper.attack, x[2], self.carrier).value)
            .collect();
        let s11: f64 = b1.iter().map(|v| v * v).sum();
        let s1y: f64 = b1.iter().zip(self.y).map(|(a, y)| a * y).sum();
        let yy: f64 = self.y.iter().map(|v| v * v).sum();
        let steps = ((hi - lo) * self.fs).floor() as usize;
        let mut best: Option<([f64; DIM], f64)> = None;
        let mut b2 = vec![0.0; n];
        for k in 0..=steps {
            let d = (lo + k as f64 / self.fs).min(hi);
            for (i, v) in b2.iter_mut().enumerate() {
                *v = event_eval(i as f64 / self.fs - d, 1.0, self.hyper.f0_s2, self.hyper.attack, x[3], self.carrier).value;
            }
            let s22: f64 = b2.iter().map(|v| v * v).sum();
            let s12: f64 = b1.iter().zip(&b2).map(|(a, b)| a * b).sum();
            let s2y: f64 = b2.iter().zip(self.y).map(|(a, y)| a * y).sum();
            let det = s11 * s22 - s12 * s12;
            let (mut a1, mut a2) = if det.abs() > 1e-12 * s11 * s22 && det != 0.0 {
                ((s1y * s22 - s2y * s12) / det, (s2y * s11 - s1y * s12) / det)
            } else {
                (x[0], x[1])
            };
            a1 = a1.clamp(bounds.lower[0], bounds.upper[0]);
            a2 = a2.clamp(bounds.lower[1], bounds.upper[1]);
            let cost = yy + a1 * a1 * s11 + a2 * a2 * s22 + 2.0 * a1 * a2 * s12 - 2.0 * a1 * s1y - 2.0 * a2 * s2y;
            if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                best = Some(([a1, a2, x[2], x[3], d], cost));
            }
        }
        best
    }
}

/// Fit one cycle by projected Levenberg-Marquardt inside `bounds`.
///
/// Non-convergence is reported through [`FitResult::converged`] with the
/// best parameters found.
pub fn fit_cycle(
    cycle: &Signal,
    init: &CycleTheta,
    bounds: &ParamBounds,
    hyper: &EventHyper,
    opts: &FitOptions,
) -> Result<FitResult> {
    bounds.validate()?;
    let x0 = init.to_array();
    if !bounds.contains(&x0) {
        return Err(Error::param("init", format!("initial guess {x0:?} lies outside the fit bounds")));
    }
    if cycle.len() < 8 {
        return Err(Error::TooShort {
            got: cycle.len(),
            need: 8,
        });
    }
    if !(opts.ftol >= 0.0 && opts.xtol >= 0.0) {
        return Err(Error::param("tolerance", "must be >= 0"));
    }
    let problem = Problem {
        y: &cycle.samples,
        fs: cycle.fs,
        hyper,
        carrier: opts.domain == FitDomain::Waveform,
    };
    let width = bounds.width();
    let mut x = x0;
    let mut cost = problem.cost(&x);
    let energy: f64 = cycle.samples.iter().map(|v| v * v).sum();
    let exact = |c: f64| c <= 1e-28 * energy.max(f64::MIN_POSITIVE);
    let finish = |x: [f64; DIM], cost: f64, converged: bool, iterations: usize| FitResult {
        theta: CycleTheta::from_array(x),
        residual_rms: (cost / cycle.len() as f64).sqrt(),
        converged,
        iterations,
        cycle_index: 0,
    };
    if exact(cost) {
        return Ok(finish(x, cost, true, 0));
    }
    if opts.scan_delta_t {
        if let Some((xs, cs)) = problem.scan_delta_t(&x, bounds) {
            if cs < cost {
                x = xs;
            }
        }
    }

    let mut lambda = 1e-3;
    for iter in 1..=opts.max_iter {
        let (c, g, h) = problem.linearize(&x);
        cost = c;
        if exact(cost) {
            return Ok(finish(x, cost, true, iter - 1));
        }
        let dmax = h.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            let mut a = h;
            for i in 0..DIM {
                a[(i, i)] += lambda * h[(i, i)].max(1e-12 * dmax);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    return Ok(finish(x, cost, false, iter));
                }
                continue;
            };
            let delta = chol.solve(&(-g));
            let trial: [f64; DIM] = bounds.clamp(std::array::from_fn(|i| x[i] + delta[i]));
            let step = (0..DIM).map(|i| (trial[i] - x[i]).abs() / width[i]).fold(0.0, f64::max);
            if step < opts.xtol {
                return Ok(finish(x, cost, true, iter));
            }
            let trial_cost = problem.cost(&trial);
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                x = trial;
                lambda = (lambda / 10.0).max(1e-12);
                if rel < opts.ftol || exact(trial_cost) {
                    return Ok(finish(x, trial_cost, true, iter));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                // No descent direction left inside the box.
                return Ok(finish(x, cost, true, iter));
            }
        }
    }
    let cost = problem.cost(&x);
    Ok(finish(x, cost, false, opts.max_iter))
}

/// Start point for a real cycle: amplitudes from the envelope peak heights,
/// decays from the log-slope after each peak and `deltaT` from the peak
/// spacing. Always inside `bounds`.
pub fn initial_guess(cycle: &[f64], fs: f64, bounds: &ParamBounds, search: &DeltaTSearch) -> CycleTheta {
    let env = smooth(&analytic_magnitude(cycle), ((0.004 * fs).round() as usize).max(1));
    let mid = bounds.midpoint();
    let peaks = two_peaks(&env, fs, search);
    let (p1, p2) = match peaks {
        Some(p) => p,
        None => return CycleTheta::from_array(mid),
    };
    let tau1 = log_slope_tau(&env, fs, p1, Some(p2)).unwrap_or(mid[2]);
    let tau2 = log_slope_tau(&env, fs, p2, None).unwrap_or(mid[3]);
    let x = [env[p1], env[p2], tau1, tau2, (p2 - p1) as f64 / fs];
    CycleTheta::from_array(bounds.clamp(x))
}

fn smooth(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 || x.is_empty() {
        return x.to_vec();
    }
    let half = width / 2;
    let mut prefix = vec![0.0; x.len() + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..x.len())
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(x.len());
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// Decay constant from a least-squares line through `ln env` between the
/// peak and the point where it falls below 20% of the peak (or `stop`).
fn log_slope_tau(env: &[f64], fs: f64, peak: usize, stop: Option<usize>) -> Option<f64> {
    let top = env[peak];
    if !(top > 0.0) {
        return None;
    }
    let end = stop.unwrap_or(env.len()).min(env.len());
    let pts: Vec<(f64, f64)> = (peak..end)
        .take_while(|&i| env[i] > 0.2 * top)
        .map(|i| ((i - peak) as f64, env[i].ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx * fs;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Peak-spacing search used for `deltaT` measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaTSearch {
    /// Minimum and maximum S1-to-S2 spacing, seconds.
    pub min_sep: f64,
    pub max_sep: f64,
    /// Peaks below this fraction of the cycle maximum are ignored.
    pub floor: f64,
}

impl Default for DeltaTSearch {
    fn default() -> Self {
        Self {
            min_sep: 0.1,
            max_sep: 0.4,
            floor: 0.1,
        }
    }
}

/// The two largest envelope peaks at least `min_sep` apart, in time order,
/// provided their spacing is below `max_sep`.
fn two_peaks(env: &[f64], fs: f64, search: &DeltaTSearch) -> Option<(usize, usize)> {
    let top = env.iter().cloned().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let min_dist = ((search.min_sep * fs).round() as usize).max(1);
    let mut peaks = analysis::pick_peaks(env, min_dist, search.floor * top);
    if peaks.len() < 2 {
        return None;
    }
    peaks.sort_by(|a, b| env[*b].total_cmp(&env[*a]));
    let (a, b) = (peaks[0].min(peaks[1]), peaks[0].max(peaks[1]));
    let sep = (b - a) as f64 / fs;
    (sep <= search.max_sep).then_some((a, b))
}

/// Per-cycle S1-to-S2 peak spacing on envelope segments. Cycles without two
/// usable peaks are skipped.
pub fn measure_delta_t(envelopes: &[Vec<f64>], fs: f64, search: &DeltaTSearch) -> Result<Vec<f64>> {
    let out: Vec<f64> = envelopes
        .iter()
        .filter_map(|e| two_peaks(e, fs, search))
        .map(|(a, b)| (b - a) as f64 / fs)
        .collect();
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no cycle among {} shows two separable envelope peaks",
            envelopes.len()
        )));
    }
    Ok(out)
}

/// Shift of a cycle start, within `+-window` seconds, that best matches the
/// two-event model. The score is the relative residual after a short
/// `deltaT` scan with amplitudes solved linearly, so it is cheap enough to
/// evaluate at every sample offset.
pub fn align_cycle_start(
    x: &[f64],
    span: (usize, usize),
    fs: f64,
    window: f64,
    bounds: &ParamBounds,
    hyper: &EventHyper,
    domain: FitDomain,
    search: &DeltaTSearch,
) -> usize {
    let w = (window * fs).round() as isize;
    let (a, b) = (span.0 as isize, span.1 as isize);
    let mut best = (span.0, f64::INFINITY);
    for off in -w..=w {
        let (s, e) = (a + off, b + off);
        if s < 0 || e as usize > x.len() || e - s < 8 {
            continue;
        }
        let seg = match domain {
            FitDomain::Waveform => analysis::normalize_cycle(&x[s as usize..e as usize]),
            FitDomain::Envelope => max_normalize(&x[s as usize..e as usize]),
        };
        let init = initial_guess(&seg, fs, bounds, search).to_array();
        let problem = Problem {
            y: &seg,
            fs,
            hyper,
            carrier: domain == FitDomain::Waveform,
        };
        let energy: f64 = seg.iter().map(|v| v * v).sum();
        let score = problem
            .scan_delta_t_in(&init, bounds, init[4] - 0.01, init[4] + 0.01)
            .map_or(f64::INFINITY, |(_, c)| c / energy.max(f64::MIN_POSITIVE));
        if score < best.1 {
            best = (s as usize, score);
        }
    }
    best.0
}

/// Fit every cycle from its own initial guess, in parallel.
pub fn fit_cycles(
    cycles: &[Vec<f64>],
    fs: f64,
    bounds: &ParamBounds,
    hyper: &EventHyper,
    opts: &FitOptions,
    search: &DeltaTSearch,
) -> Result<Vec<FitResult>> {
    cycles
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let init = initial_guess(c, fs, bounds, search);
            let sig = Signal::new(c.clone(), fs)?;
            let mut fit = fit_cycle(&sig, &init, bounds, hyper, opts)?;
            fit.cycle_index = k;
            Ok(fit)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Box half-width in standard deviations.
    pub dispersion_mult: f64,
    /// Smallest box width as a fraction of the global range.
    pub min_width_frac: f64,
    pub global: ParamBounds,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            dispersion_mult: 2.0,
            min_width_frac: 0.01,
            global: ParamBounds::global(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: [f64; DIM],
    /// Row-major sample covariance.
    pub covariance: [[f64; DIM]; DIM],
    #[serde(rename = "box")]
    pub bounds: ParamBounds,
    pub n_cycles: usize,
}

impl ParamSummary {
    pub fn std(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let s = self.std();
        if s[i] > 0.0 && s[j] > 0.0 {
            self.covariance[i][j] / (s[i] * s[j])
        } else {
            0.0
        }
    }
}

/// Gaussian summary and sampling box over the converged fits.
pub fn summarize_parameters(fits: &[FitResult], opts: &SummaryOptions) -> Result<ParamSummary> {
    opts.global.validate()?;
    if !(opts.dispersion_mult >= 0.0 && opts.dispersion_mult.is_finite()) {
        return Err(Error::param("dispersion_mult", "must be finite and >= 0"));
    }
    if !(opts.min_width_frac > 0.0 && opts.min_width_frac <= 1.0) {
        return Err(Error::param("min_width_frac", "must be in (0, 1]"));
    }
    let mut xs: Vec<[f64; DIM]> = fits.iter().filter(|f| f.converged).map(|f| f.theta.to_array()).collect();
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} converged fits, need at least 5",
            xs.len()
        )));
    }
    // Order-independent sums.
    xs.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let n = xs.len() as f64;
    let mean: [f64; DIM] = std::array::from_fn(|i| xs[0][i] + xs.iter().map(|x| x[i] - xs[0][i]).sum::<f64>() / n);
    let mut cov = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in i..DIM {
            let c = xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / (n - 1.0);
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    let g = &opts.global;
    let mut lower = [0.0; DIM];
    let mut upper = [0.0; DIM];
    for i in 0..DIM {
        let half = opts.dispersion_mult * cov[i][i].sqrt();
        let mut lo = (mean[i] - half).max(g.lower[i]);
        let mut hi = (mean[i] + half).min(g.upper[i]);
        let min_w = opts.min_width_frac * (g.upper[i] - g.lower[i]);
        if !(hi - lo >= min_w) {
            let c = (0.5 * (lo + hi)).clamp(g.lower[i] + 0.5 * min_w, g.upper[i] - 0.5 * min_w);
            lo = c - 0.5 * min_w;
            hi = c + 0.5 * min_w;
        }
        lower[i] = lo;
        upper[i] = hi;
    }
    Ok(ParamSummary {
        mean,
        covariance: cov,
        bounds: ParamBounds::new(lower, upper)?,
        n_cycles: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub param: String,
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    /// Normalized so the histogram integrates to one.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairGrid {
    pub x: String,
    pub y: String,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// `density[iy][ix]`, integrating to one.
    pub density: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerData {
    pub names: Vec<String>,
    pub samples: Vec<[f64; DIM]>,
    pub histograms: Vec<Histogram>,
    /// Lower-triangle pairs `(i, j)` with `j < i`.
    pub pairs: Vec<PairGrid>,
}

/// Draws from `N(mean, covariance)` plus marginal and pairwise density
/// grids.
pub fn gaussian_corner_samples(summary: &ParamSummary, n: usize, bins: usize, seed: u64) -> Result<CornerData> {
    if bins == 0 {
        return Err(Error::param("bins", "must be >= 1"));
    }
    let cov = Matrix5::from_fn(|i, j| 0.5 * (summary.covariance[i][j] + summary.covariance[j][i]));
    let floor = 1e-12 * cov.trace().max(0.0);
    let eig = SymmetricEigen::new(cov);
    let scale = eig.eigenvalues.map(|l| l.max(floor).sqrt());
    let mut rng = seed::rng(seed);
    let samples: Vec<[f64; DIM]> = (0..n)
        .map(|_| {
            let z = Vector5::from_fn(|i, _| {
                let v: f64 = rng.sample(StandardNormal);
                v * scale[i]
            });
            let d = eig.eigenvectors * z;
            std::array::from_fn(|i| summary.mean[i] + d[i])
        })
        .collect();
    let ranges: Vec<(f64, f64)> = (0..DIM).map(|i| value_range(&samples, i, summary.mean[i])).collect();
    let histograms = (0..DIM)
        .map(|i| {
            let edges = edges(ranges[i], bins);
            let mut counts = vec![0.0; bins];
            for s in &samples {
                counts[bin_of(s[i], ranges[i], bins)] += 1.0;
            }
            let w = (ranges[i].1 - ranges[i].0) / bins as f64;
            let total = n.max(1) as f64 * w;
            Histogram {
                param: THETA_NAMES[i].to_string(),
                edges,
                density: counts.iter().map(|c| c / total).collect(),
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 1..DIM {
        for j in 0..i {
            let (rx, ry) = (ranges[j], ranges[i]);
            let mut grid = vec![vec![0.0; bins]; bins];
            for s in &samples {
                grid[bin_of(s[i], ry, bins)][bin_of(s[j], rx, bins)] += 1.0;
            }
            let area = (rx.1 - rx.0) * (ry.1 - ry.0) / (bins * bins) as f64;
            let total = n.max(1) as f64 * area;
            for row in &mut grid {
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            pairs.push(PairGrid {
                x: THETA_NAMES[j].to_string(),
                y: THETA_NAMES[i].to_string(),
                x_edges: edges(rx, bins),
                y_edges: edges(ry, bins),
                density: grid,
            });
        }
    }
    Ok(CornerData {
        names: THETA_NAMES.iter().map(|s| s.to_string()).collect(),
        samples,
        histograms,
        pairs,
    })
}

fn value_range(samples: &[[f64; DIM]], i: usize, center: f64) -> (f64, f64) {
    let lo = samples.iter().map(|s| s[i]).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s[i]).fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        let pad = 1e-6 * center.abs().max(1e-12);
        (center - pad, center + pad)
    }
}

fn edges((lo, hi): (f64, f64), bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
}

fn bin_of(v: f64, (lo, hi): (f64, f64), bins: usize) -> usize {
    let k = ((v - lo) / (hi - lo) * bins as f64).floor();
    (k.max(0.0) as usize).min(bins - 1)
}

impl CornerData {
    /// One row per draw.
    pub fn samples_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for x in &self.samples {
            let row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// `param,bin_lo,bin_hi,density`.
    pub fn histograms_csv(&self) -> String {
        let mut s = String::from("param,bin_lo,bin_hi,density\n");
        for h in &self.histograms {
            for (k, d) in h.density.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{}", h.param, h.edges[k], h.edges[k + 1], d);
            }
        }
        s
    }

    /// `x_param,y_param,x_lo,x_hi,y_lo,y_hi,density`.
    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("x_param,y_param,x_lo,x_hi,y_lo,y_hi,density\n");
        for p in &self.pairs {
            for (iy, row) in p.density.iter().enumerate() {
                for (ix, d) in row.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        p.x,
                        p.y,
                        p.x_edges[ix],
                        p.x_edges[ix + 1],
                        p.y_edges[iy],
                        p.y_edges[iy + 1],
                        d
                    );
                }
            }
        }
        s
    }
}

/// `cycle_index,A_S1,...,deltaT,residual_rms,converged,iterations`.
pub fn fits_csv(fits: &[FitResult]) -> String {
    let mut s = format!("cycle_index,{},residual_rms,converged,iterations\n", THETA_NAMES.join(","));
    for f in fits {
        let t = f.theta.to_array();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            f.cycle_index, t[0], t[1], t[2], t[3], t[4], f.residual_rms, f.converged, f.iterations
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub preproc: PreprocConfig,
    pub hyper: EventHyper,
    pub fit_bounds: ParamBounds,
    pub fit: FitOptions,
    pub delta_t_search: DeltaTSearch,
    /// Half-width of the cycle-start alignment search, seconds.
    pub align_window: f64,
    pub summary: SummaryOptions,
    pub corner_samples: usize,
    pub corner_bins: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            preproc: PreprocConfig::default(),
            hyper: EventHyper {
                f0_s1: 40.0,
                f0_s2: 50.0,
                attack: crate::kernel::DEFAULT_ATTACK,
            },
            fit_bounds: ParamBounds::global(),
            fit: FitOptions::default(),
            delta_t_search: DeltaTSearch::default(),
            align_window: 0.02,
            summary: SummaryOptions::default(),
            corner_samples: 10_000,
            corner_bins: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub fs: f64,
    pub t0: f64,
    pub n_cycles: usize,
    pub fits: Vec<FitResult>,
    pub summary: ParamSummary,
    /// Peak-spacing measurements usable for `deltaT` bootstrapping.
    pub delta_t_measured: Vec<f64>,
    pub corner: CornerData,
}

/// Preprocess, segment, fit every cycle and summarize.
pub fn calibrate(x: &Signal, cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    let a = analysis::analyze(x, &cfg.preproc)?;
    let fs = x.fs;
    let source = match cfg.fit.domain {
        FitDomain::Waveform => &a.pre.bandpassed.samples,
        FitDomain::Envelope => &a.pre.detail.samples,
    };
    let cycles: Vec<Vec<f64>> = a
        .cycles
        .spans
        .par_iter()
        .map(|&(s, e)| {
            let start = align_cycle_start(
                source,
                (s, e),
                fs,
                cfg.align_window,
                &cfg.fit_bounds,
                &cfg.hyper,
                cfg.fit.domain,
                &cfg.delta_t_search,
            );
            let seg = &source[start..(start + e - s).min(source.len())];
            match cfg.fit.domain {
                FitDomain::Waveform => analysis::normalize_cycle(seg),
                FitDomain::Envelope => max_normalize(seg),
            }
        })
        .collect();
    let fits = fit_cycles(&cycles, fs, &cfg.fit_bounds, &cfg.hyper, &cfg.fit, &cfg.delta_t_search).stage("fit")?;
    let summary = summarize_parameters(&fits, &cfg.summary).stage("summary")?;
    let envelopes: Vec<Vec<f64>> = a.cycles.slice_raw(&a.pre.detail.samples).iter().map(|c| c.to_vec()).collect();
    let delta_t_measured = measure_delta_t(&envelopes, fs, &cfg.delta_t_search).unwrap_or_default();
    let corner = gaussian_corner_samples(&summary, cfg.corner_samples, cfg.corner_bins, cfg.seed).stage("corner")?;
    Ok(CalibrationReport {
        fs,
        t0: a.t0,
        n_cycles: cycles.len(),
        fits,
        summary,
        delta_t_measured,
        corner,
    })
}

fn max_normalize(x: &[f64]) -> Vec<f64> {
    let top = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top > 0.0 {
        x.iter().map(|v| v / top).collect()
    } else {
        x.to_vec()
    }
}

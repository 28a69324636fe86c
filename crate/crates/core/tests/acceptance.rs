//! Acceptance suite: one PASS/FAIL line per criterion, run sequentially so
//! the wall-clock budgets are meaningful. Exits non-zero when any
//! criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use fpcg::analysis::{self, compare_stats, PreprocConfig};
use fpcg::calibration::{self, DeltaTSearch, FitOptions};
use fpcg::config::SimConfig;
use fpcg::dsp::fft::{direct_convolve, fft_convolve};
use fpcg::heart::{render_cycle, EventHyper};
use fpcg::kernel::{self, EventParams};
use fpcg::noise;
use fpcg::sampler::{self, McmcSettings, ParamBounds, PriorSpec};
use fpcg::seed::derive_indexed;
use fpcg::signal::Signal;
use fpcg::simulate::simulate;
use fpcg::transmission::{cascade_response, TransmissionConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn run(name: &str, budget: Duration, f: fn() -> Outcome) -> bool {
    let t = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = t.elapsed();
    let (pass, detail) = match result {
        Ok(o) => (o.pass && elapsed <= budget, o.detail),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let budget_note = if elapsed > budget { " OVER BUDGET" } else { "" };
    say(&format!(
        "{} {name}: {detail} [{:.2}s / {:.0}s{budget_note}]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    ));
    pass
}

fn kernel_correctness() -> Outcome {
    let mut grid = Vec::new();
    for amp in [0.1, 1.0, 2.5, 4.0] {
        for f0 in [25.0, 40.0, 60.0, 90.0, 120.0] {
            for (attack, tau) in [(0.004, 0.01), (0.008, 0.02), (0.012, 0.05), (0.015, 0.1), (0.006, 0.003)] {
                grid.push(EventParams::new(amp, f0, attack, tau).unwrap());
            }
        }
    }
    assert_eq!(grid.len(), 100);
    let mut worst_cont: f64 = 0.0;
    let mut worst_lin: f64 = 0.0;
    let mut causal = true;
    for p in &grid {
        let at = kernel::envelope(p.attack, p.attack, p.tau).unwrap();
        let below = f64::from_bits(p.attack.to_bits() - 1);
        let left = kernel::envelope(below, p.attack, p.tau).unwrap();
        worst_cont = worst_cont.max((at - 1.0).abs()).max((left - 1.0).abs());
        for t in [-1.0, -0.01, -1e-9, -f64::MIN_POSITIVE] {
            causal &= kernel::kernel(t, p).unwrap() == 0.0 && kernel::envelope(t, p.attack, p.tau).unwrap() == 0.0;
        }
        let x = kernel::render_event(p, 1000.0).unwrap();
        causal &= x.samples[0] == 0.0;
        for c in [0.5, 3.0] {
            let q = EventParams {
                amplitude: p.amplitude * c,
                ..*p
            };
            let y = kernel::render_event(&q, 1000.0).unwrap();
            let peak = x.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in x.samples.iter().zip(&y.samples) {
                worst_lin = worst_lin.max((c * a - b).abs() / (c * peak));
            }
        }
    }
    outcome(
        worst_cont <= 1e-12 && causal && worst_lin <= 1e-12,
        format!("100 grid points; continuity err {worst_cont:.1e}, causal {causal}, linearity err {worst_lin:.1e}"),
    )
}

fn transmission_oracle() -> Outcome {
    let fs = 1000.0;
    let mut worst_peak = 0i64;
    let mut worst_dc: f64 = 0.0;
    let betas1 = [50.0, 75.0, 100.0, 125.0, 150.0];
    let betas2 = [200.0, 260.0, 330.0, 400.0];
    for b1 in betas1 {
        for b2 in betas2 {
            let cfg = TransmissionConfig {
                beta1: b1,
                beta2: b2,
                use_delays: false,
                ..TransmissionConfig::default()
            };
            let h = cascade_response(&cfg, fs).unwrap();
            let argmax = h
                .samples
                .iter()
                .enumerate()
                .fold(0, |m, (i, v)| if *v > h.samples[m] { i } else { m });
            let t_star = (b2 / b1).ln() / (b2 - b1);
            worst_peak = worst_peak.max((argmax as i64 - (t_star * fs).round() as i64).abs());
            worst_dc = worst_dc.max((h.samples.iter().sum::<f64>() / fs - 1.0).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_fft: f64 = 0.0;
    let h = cascade_response(&TransmissionConfig::default(), fs).unwrap();
    for len in [10, 1000, 5000, 43_000] {
        let x: Vec<f64> = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
        let d = direct_convolve(&x, &h.samples);
        let f = fft_convolve(&x, &h.samples);
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = d.iter().zip(&f).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst_fft = worst_fft.max(err / scale);
    }
    outcome(
        worst_peak <= 1 && worst_dc <= 1e-9 && worst_fft <= 1e-7,
        format!("20 pairs; peak offset {worst_peak} samples, DC err {worst_dc:.1e}, FFT/direct rel err {worst_fft:.1e}"),
    )
}

fn noise_statistics() -> Outcome {
    let n = 1_000_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, rho) in [0.0, 0.5, 0.9, -0.7].into_iter().enumerate() {
        let x = noise::ar1_noise(rho, n, 1000.0, 100 + k as u64).unwrap().samples;
        let m = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
        let lag1 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n - 1) as f64 / var;
        ok &= (var - 1.0).abs() <= 0.02 && (lag1 - rho).abs() <= 0.01;
        parts.push(format!("rho {rho}: var {var:.4} r1 {lag1:.4}"));
    }
    let mut worst_snr: f64 = 0.0;
    let mut cfg = SimConfig {
        cycles_per_sample: 60,
        ..SimConfig::default()
    };
    for target in [0.0, 5.0, 10.0, 20.0] {
        cfg.noise.snr_db = target;
        let rec = simulate(&cfg, 7).unwrap();
        let got = rec.annotations.realized_snr_db.unwrap();
        let direct = noise::realized_snr_db(&rec.components.cardiac.samples, &rec.components.noise.samples);
        worst_snr = worst_snr.max((got - target).abs()).max((direct - target).abs());
    }
    ok &= worst_snr <= 0.1;
    outcome(ok, format!("{}; SNR worst err {worst_snr:.2e} dB", parts.join(", ")))
}

fn chi_square_uniform(values: &[f64], lo: f64, hi: f64, bins: usize) -> (f64, f64) {
    let mut counts = vec![0.0; bins];
    for v in values {
        let k = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[k.min(bins - 1)] += 1.0;
    }
    let expect = values.len() as f64 / bins as f64;
    let stat = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
    let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
    (stat, crit)
}

/// Integrated autocorrelation time with Sokal's automatic window.
fn autocorr_time(x: &[f64]) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64 / var;
        tau += 2.0 * c;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

fn sampler_correctness() -> Outcome {
    let bounds = ParamBounds::default_box();
    let priors = [
        PriorSpec::uniform(),
        PriorSpec::truncated_gaussian(None, None),
        PriorSpec::mcmc(32, 200),
    ];
    let mut contained = true;
    for (k, prior) in priors.iter().enumerate() {
        let thetas = sampler::sample_thetas(prior, &bounds, 5000, 40 + k as u64).unwrap();
        contained &= thetas.iter().all(|t| bounds.contains(&t.to_array()));
    }

    let thetas = sampler::sample_thetas(&PriorSpec::uniform(), &bounds, 20_000, 5).unwrap();
    let mut chi_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..5 {
        let v: Vec<f64> = thetas.iter().map(|t| t.to_array()[i]).collect();
        let (stat, crit) = chi_square_uniform(&v, bounds.lower[i], bounds.upper[i], 20);
        chi_ok &= stat < crit;
        worst_ratio = worst_ratio.max(stat / crit);
    }

    let walkers = 32;
    let thin = 10;
    let settings = McmcSettings {
        walkers,
        burn_in: 500,
        steps: 500 + thin * 400_000 / walkers + thin,
        thin,
        ..McmcSettings::default()
    };
    let run = sampler::ensemble_mcmc(&[0.0], &[1.0], &settings, 9).unwrap();
    let xs: Vec<f64> = run.samples.iter().map(|s| s[0]).collect();
    // per-walker chains are interleaved walker-major within each kept step
    let per = xs.len() / walkers;
    let tau = (0..walkers)
        .map(|w| autocorr_time(&(0..per).map(|s| xs[s * walkers + w]).collect::<Vec<_>>()))
        .sum::<f64>()
        / walkers as f64;
    let ess = xs.len() as f64 / tau;
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ks = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
        .fold(0.0, f64::max);
    let pass = contained && chi_ok && ks <= 0.02 && ess >= 1e5;
    outcome(
        pass,
        format!(
            "containment {contained}; chi-square worst stat/crit {worst_ratio:.2}; MCMC KS {ks:.4} at ESS {ess:.0} (tau {tau:.2}, acceptance {:.2})",
            run.acceptance_rate
        ),
    )
}

fn calibration_round_trip() -> Outcome {
    let fs = 1000.0;
    let hyper = EventHyper {
        f0_s1: 40.0,
        f0_s2: 50.0,
        attack: kernel::DEFAULT_ATTACK,
    };
    let fit_bounds = ParamBounds::global();
    let search = DeltaTSearch::default();
    let opts = FitOptions::default();
    let thetas = sampler::sample_thetas(&PriorSpec::uniform(), &ParamBounds::default_box(), 50, 2024).unwrap();
    let len = 429;
    let mut worst_clean: f64 = 0.0;
    let mut noisy_ok = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for th in &thetas {
        let mut y = render_cycle(th, &hyper, fs, 1.0, len);
        y.truncate(len);
        let init = calibration::initial_guess(&y, fs, &fit_bounds, &search);
        let fit = calibration::fit_cycle(&Signal::new(y.clone(), fs).unwrap(), &init, &fit_bounds, &hyper, &opts).unwrap();
        let (a, b) = (th.to_array(), fit.theta.to_array());
        let rel = (0..5).map(|i| ((b[i] - a[i]) / a[i]).abs()).fold(0.0, f64::max);
        worst_clean = worst_clean.max(if fit.converged { rel } else { f64::INFINITY });

        let power = y.iter().map(|v| v * v).sum::<f64>() / len as f64;
        let noise = Normal::new(0.0, (power / 100.0).sqrt()).unwrap();
        let yn: Vec<f64> = y.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let init = calibration::initial_guess(&yn, fs, &fit_bounds, &search);
        let fit = calibration::fit_cycle(&Signal::new(yn, fs).unwrap(), &init, &fit_bounds, &hyper, &opts).unwrap();
        let b = fit.theta.to_array();
        if ((b[0] - a[0]) / a[0]).abs() <= 0.1 && ((b[1] - a[1]) / a[1]).abs() <= 0.1 && (b[4] - a[4]).abs() <= 0.005 {
            noisy_ok += 1;
        }
    }
    outcome(
        worst_clean <= 0.01 && noisy_ok >= 45,
        format!("noiseless worst rel err {worst_clean:.2e} over 50 cycles; 20 dB within tolerance {noisy_ok}/50"),
    )
}

fn end_to_end() -> Outcome {
    let cfg = SimConfig::default();
    let pc = PreprocConfig::default();
    let fs = cfg.fs;
    let first = simulate(&cfg, derive_indexed(cfg.seed, "recording", 0)).unwrap();
    let second = simulate(&cfg, derive_indexed(cfg.seed, "recording", 1)).unwrap();
    let a = analysis::analyze(&first.mixture, &pc).unwrap();
    let t0_err = (a.t0 - 60.0 / 140.0).abs();
    let detected = a.cycles.onset_times();
    let truth = &first.annotations.onsets;
    let hits = truth.iter().filter(|t| detected.iter().any(|d| (d - *t).abs() <= 0.010)).count();
    let hit_rate = hits as f64 / truth.len() as f64;
    let rep = compare_stats(&first.mixture, &second.mixture, &pc).unwrap();
    let pass = t0_err <= 2.0 / fs && hit_rate >= 0.95 && rep.acf_rmse < 0.05 && rep.psd_rmse_db < 3.0;

    // Spread over further independent pairs, reported for context only.
    let mut psd: Vec<f64> = (1..=10u64)
        .map(|k| {
            let x = simulate(&cfg, derive_indexed(cfg.seed, "pair", 2 * k)).unwrap();
            let y = simulate(&cfg, derive_indexed(cfg.seed, "pair", 2 * k + 1)).unwrap();
            compare_stats(&x.mixture, &y.mixture, &pc).unwrap().psd_rmse_db
        })
        .collect();
    psd.sort_by(f64::total_cmp);
    outcome(
        pass,
        format!(
            "T0 {:.4} s (err {t0_err:.1e}); onsets {hits}/{} within 10 ms; ACF RMSE {:.4}; PSD RMSE {:.2} dB; envelope corr {:.3}; PSD RMSE over 10 more pairs median {:.2} max {:.2}",
            a.t0,
            truth.len(),
            rep.acf_rmse,
            rep.psd_rmse_db,
            rep.envelope_corr,
            psd[5],
            psd[9]
        ),
    )
}

/// A configuration with every table parameter drawn inside its suggested
/// range.
fn fuzzed_config(rng: &mut ChaCha8Rng) -> SimConfig {
    let mut cfg = SimConfig::default();
    let uni = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo + rng.random::<f64>() * (hi - lo);
    let pair = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        let a = uni(rng, lo, hi);
        let b = uni(rng, lo, hi);
        format!("({}, {})", a.min(b), a.max(b))
    };
    let scalars: [(&str, f64, f64); 17] = [
        ("fs", 500.0, 2000.0),
        ("fhr", 120.0, 160.0),
        ("mhr", 60.0, 100.0),
        ("r1", 0.005, 0.02),
        ("c1", 1400.0, 1600.0),
        ("beta1", 50.0, 150.0),
        ("A1", 0.5, 1.5),
        ("r2", 0.02, 0.05),
        ("c2", 1500.0, 1600.0),
        ("beta2", 200.0, 400.0),
        ("A2", 0.5, 1.0),
        ("snr_db", 5.0, 20.0),
        ("movement_intensity", 1.0, 2.0),
        ("movement_rate_per_min", 5.0, 15.0),
        ("movement_thump_prob", 0.2, 0.5),
        ("uc_rate_per_10min", 2.0, 6.0),
        ("uc_attenuation", 0.3, 0.6),
    ];
    for (k, lo, hi) in scalars {
        cfg.set(k, &uni(rng, lo, hi).to_string()).unwrap();
    }
    cfg.set("uc_noise_intensity", &uni(rng, 0.5, 1.0).to_string()).unwrap();
    cfg.set("movement_duration_range", &pair(rng, 0.1, 0.5)).unwrap();
    cfg.set("movement_band", &pair(rng, 10.0, 300.0)).unwrap();
    cfg.set("uc_duration_range", &pair(rng, 5.0, 30.0)).unwrap();
    cfg.set("uc_rise_fall_frac", &pair(rng, 0.3, 0.4)).unwrap();
    cfg.set("uc_noise_band", &pair(rng, 0.5, 20.0)).unwrap();
    cfg.set("movement_enabled", if rng.random::<bool>() { "true" } else { "false" }).unwrap();
    cfg.set("uc_enabled", if rng.random::<bool>() { "true" } else { "false" }).unwrap();
    let prior = ["uniform", "truncated_gaussian", "ensemble_mcmc"][rng.random_range(0..3)];
    cfg.set("prior", prior).unwrap();
    cfg.set("rr_mode", ["constant", "weak_hrv"][rng.random_range(0..2)]).unwrap();
    cfg.cycles_per_sample = rng.random_range(5..=40);
    cfg
}

fn determinism_and_component_sum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let total = 1000;
    for i in 0..total {
        let cfg = fuzzed_config(&mut rng);
        let seed: u64 = rng.random();
        let result = catch_unwind(AssertUnwindSafe(|| {
            let a = simulate(&cfg, seed)?;
            let b = simulate(&cfg, seed)?;
            Ok::<_, fpcg::Error>((a, b))
        }));
        match result {
            Err(_) => failures.push(format!("#{i} panicked")),
            Ok(Err(e)) => failures.push(format!("#{i} error: {e}")),
            Ok(Ok((a, b))) => {
                if a != b {
                    failures.push(format!("#{i} not reproducible"));
                }
                let sum = a.components.sum();
                let err = a.mixture.samples.iter().zip(&sum).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                worst = worst.max(err);
                if err > 1e-9 {
                    failures.push(format!("#{i} component sum off by {err:.1e}"));
                }
            }
        }
    }
    let shown: Vec<&String> = failures.iter().take(3).collect();
    outcome(
        failures.is_empty(),
        format!(
            "{total} fuzzed configs; {} failures {shown:?}; worst component-sum err {worst:.1e}",
            failures.len()
        ),
    )
}

/// Optional: set FPCG_REAL_RECORDING to a real abdominal recording.
fn real_data() -> Option<Outcome> {
    let path = std::env::var_os("FPCG_REAL_RECORDING")?;
    let path = std::path::PathBuf::from(path);
    Some((|| {
        let x = match fpcg::io::ingest_recording(&path, None, None) {
            Ok(x) => x,
            Err(e) => return outcome(false, format!("cannot read {}: {e}", path.display())),
        };
        let rep = match calibration::calibrate(&x, &calibration::CalibrationConfig::default()) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("calibrate failed: {e}")),
        };
        let fits: Vec<[f64; 5]> = rep.fits.iter().filter(|f| f.converged).map(|f| f.theta.to_array()).collect();
        let modes: Vec<usize> = (0..5).map(|i| histogram_modes(&fits.iter().map(|t| t[i]).collect::<Vec<_>>(), 20)).collect();
        let corr = correlation(&fits.iter().map(|t| t[2]).collect::<Vec<_>>(), &fits.iter().map(|t| t[3]).collect::<Vec<_>>());
        outcome(
            fits.len() >= 5 && modes.iter().all(|m| *m == 1) && corr > 0.0,
            format!("{} converged fits at {} Hz; histogram modes {modes:?}; tau_S1/tau_S2 corr {corr:.3}", fits.len(), x.fs),
        )
    })())
}

fn histogram_modes(v: &[f64], bins: usize) -> usize {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return 1;
    }
    let mut counts = vec![0usize; bins];
    for x in v {
        counts[(((x - lo) / (hi - lo)) * bins as f64).floor().min(bins as f64 - 1.0) as usize] += 1;
    }
    let top = *counts.iter().max().unwrap();
    // plateaus of equal counts count once
    let mut modes = 0;
    let mut i = 0;
    while i < bins {
        let mut j = i;
        while j + 1 < bins && counts[j + 1] == counts[i] {
            j += 1;
        }
        let left = if i == 0 { 0 } else { counts[i - 1] };
        let right = if j + 1 == bins { 0 } else { counts[j + 1] };
        if counts[i] > left && counts[i] > right && counts[i] == top {
            modes += 1;
        }
        i = j + 1;
    }
    modes.max(1)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run("kernel correctness", secs(1), kernel_correctness),
        run("transmission oracle", secs(5), transmission_oracle),
        run("noise statistics", secs(30), noise_statistics),
        run("sampler correctness", secs(60), sampler_correctness),
        run("calibration round-trip", secs(120), calibration_round_trip),
        run("end-to-end self-consistency", secs(60), end_to_end),
        run("determinism and component sum", secs(300), determinism_and_component_sum),
    ];
    match real_data() {
        None => say("SKIP real-data smoke test: FPCG_REAL_RECORDING not set"),
        Some(o) => say(&format!("{} real-data smoke test: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail)),
    }
    let failed = results.iter().filter(|p| !**p).count();
    say(&format!("acceptance: {} passed, {failed} failed", results.len() - failed));
    if failed > 0 {
        std::process::exit(1);
    }
}

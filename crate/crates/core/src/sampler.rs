//! Cycle-to-cycle parameter sampling inside a bounded box: flat prior,
//! truncated Gaussian, affine-invariant ensemble MCMC and a systolic-interval
//! bootstrap.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::heart::{CycleTheta, THETA_NAMES};
use crate::seed;

pub const DIM: usize = 5;

/// Componentwise box over (A_S1, A_S2, tau_S1, tau_S2, deltaT).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: [f64; DIM],
    pub upper: [f64; DIM],
}

impl ParamBounds {
    pub fn new(lower: [f64; DIM], upper: [f64; DIM]) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// Default sampling box for a normal fetal cycle.
    pub fn default_box() -> Self {
        Self {
            lower: [0.8, 0.5, 0.015, 0.012, 0.19],
            upper: [1.2, 0.9, 0.030, 0.025, 0.23],
        }
    }

    /// Hard physiologic limits every box must respect.
    pub fn global() -> Self {
        Self {
            lower: [0.01, 0.01, 0.003, 0.003, 0.10],
            upper: [5.0, 5.0, 0.10, 0.10, 0.40],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..DIM {
            let (l, u) = (self.lower[i], self.upper[i]);
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::param(
                    THETA_NAMES[i],
                    format!("bounds need lower < upper, got [{l}, {u}]"),
                ));
            }
        }
        Ok(())
    }

    /// Also require the box to sit inside `global`.
    pub fn validate_within(&self, global: &ParamBounds) -> Result<()> {
        self.validate()?;
        for i in 0..DIM {
            if self.lower[i] < global.lower[i] || self.upper[i] > global.upper[i] {
                return Err(Error::param(
                    THETA_NAMES[i],
                    format!(
                        "box [{}, {}] leaves the global bounds [{}, {}]",
                        self.lower[i], self.upper[i], global.lower[i], global.upper[i]
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn midpoint(&self) -> [f64; DIM] {
        std::array::from_fn(|i| 0.5 * (self.lower[i] + self.upper[i]))
    }

    pub fn width(&self) -> [f64; DIM] {
        std::array::from_fn(|i| self.upper[i] - self.lower[i])
    }

    pub fn clamp(&self, x: [f64; DIM]) -> [f64; DIM] {
        std::array::from_fn(|i| x[i].clamp(self.lower[i], self.upper[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Uniform,
    TruncatedGaussian,
    EnsembleMcmc,
}

impl PriorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PriorKind::Uniform => "uniform",
            PriorKind::TruncatedGaussian => "truncated_gaussian",
            PriorKind::EnsembleMcmc => "ensemble_mcmc",
        }
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(PriorKind::Uniform),
            "truncated_gaussian" | "gaussian" => Ok(PriorKind::TruncatedGaussian),
            "ensemble_mcmc" | "mcmc" => Ok(PriorKind::EnsembleMcmc),
            other => Err(Error::param(
                "prior",
                format!("unknown prior `{other}` (uniform, truncated_gaussian, ensemble_mcmc)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// Gaussian centre; defaults to the box midpoint.
    pub mean: Option<[f64; DIM]>,
    /// Gaussian spread; defaults to a quarter of the box width.
    pub std: Option<[f64; DIM]>,
    pub walkers: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            kind: PriorKind::Uniform,
            mean: None,
            std: None,
            walkers: 32,
            burn_in: 200,
            thin: 1,
        }
    }
}

impl PriorSpec {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn truncated_gaussian(mean: Option<[f64; DIM]>, std: Option<[f64; DIM]>) -> Self {
        Self {
            kind: PriorKind::TruncatedGaussian,
            mean,
            std,
            ..Self::default()
        }
    }

    pub fn mcmc(walkers: usize, burn_in: usize) -> Self {
        Self {
            kind: PriorKind::EnsembleMcmc,
            walkers,
            burn_in,
            ..Self::default()
        }
    }
}

/// Draw `n` cycle vectors inside `bounds` according to `prior`.
pub fn sample_thetas(prior: &PriorSpec, bounds: &ParamBounds, n: usize, seed: u64) -> Result<Vec<CycleTheta>> {
    bounds.validate()?;
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    let raw: Vec<[f64; DIM]> = match prior.kind {
        PriorKind::Uniform => {
            let mut rng = seed::rng(seed);
            (0..n)
                .map(|_| {
                    std::array::from_fn(|i| bounds.lower[i] + rng.random::<f64>() * (bounds.upper[i] - bounds.lower[i]))
                })
                .collect()
        }
        PriorKind::TruncatedGaussian => {
            let mean = prior.mean.unwrap_or_else(|| bounds.midpoint());
            let width = bounds.width();
            let std = prior.std.unwrap_or_else(|| std::array::from_fn(|i| width[i] / 4.0));
            truncated_gaussian(&mean, &std, bounds, n, seed)?
        }
        PriorKind::EnsembleMcmc => {
            let steps_needed = n.div_ceil(prior.walkers.max(1)) * prior.thin.max(1);
            let run = ensemble_mcmc(
                &bounds.lower,
                &bounds.upper,
                &McmcSettings {
                    walkers: prior.walkers,
                    steps: prior.burn_in + steps_needed,
                    burn_in: prior.burn_in,
                    thin: prior.thin,
                    ..McmcSettings::default()
                },
                seed,
            )?;
            run.samples
                .into_iter()
                .take(n)
                .map(|s| std::array::from_fn(|i| s[i]))
                .collect()
        }
    };
    Ok(raw.into_iter().map(CycleTheta::from_array).collect())
}

/// Independent-component Gaussian restricted to the box. With a diagonal
/// covariance the truncated joint factorizes, so each component is drawn
/// by inverting its truncated CDF; this is distributionally identical to
/// rejection from the full Gaussian but does not degrade when the spread
/// is wide compared to the box.
fn truncated_gaussian(
    mean: &[f64; DIM],
    std: &[f64; DIM],
    bounds: &ParamBounds,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; DIM]>> {
    let mut comps = Vec::with_capacity(DIM);
    let mut acceptance = 1.0;
    for i in 0..DIM {
        if !(std[i] > 0.0 && std[i].is_finite() && mean[i].is_finite()) {
            return Err(Error::param(THETA_NAMES[i], "Gaussian prior needs finite mean and std > 0"));
        }
        // mirror so the box sits on the lower side of the mean, where the
        // CDF keeps full relative precision
        let flip = bounds.lower[i] > mean[i];
        let (a, b) = if flip {
            (2.0 * mean[i] - bounds.upper[i], 2.0 * mean[i] - bounds.lower[i])
        } else {
            (bounds.lower[i], bounds.upper[i])
        };
        let dist = Normal::new(mean[i], std[i]).map_err(|e| Error::param(THETA_NAMES[i], e.to_string()))?;
        let (ca, cb) = (dist.cdf(a), dist.cdf(b));
        let mass = cb - ca;
        acceptance *= mass;
        let gap = (bounds.lower[i] - mean[i]).max(mean[i] - bounds.upper[i]).max(0.0);
        if !(mass > 0.0) || gap > 3.0 * std[i] {
            return Err(Error::MisspecifiedPrior(format!(
                "{}: box [{}, {}] lies {:.1} std from the prior mean {}",
                THETA_NAMES[i],
                bounds.lower[i],
                bounds.upper[i],
                gap / std[i],
                mean[i]
            )));
        }
        comps.push((dist, ca, mass, flip));
    }
    if acceptance < 1e-3 {
        log::debug!("truncated Gaussian keeps {:.2e} of the prior mass", acceptance);
    }
    let mut rng = seed::rng(seed);
    Ok((0..n)
        .map(|_| {
            std::array::from_fn(|i| {
                let (dist, ca, mass, flip) = &comps[i];
                let u = ca + rng.random::<f64>() * mass;
                let x = dist.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
                let x = if *flip { 2.0 * mean[i] - x } else { x };
                x.clamp(bounds.lower[i], bounds.upper[i])
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcSettings {
    pub walkers: usize,
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Stretch scale.
    pub a: f64,
    /// Consecutive steps without any accepted move before giving up.
    pub stuck_after: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            walkers: 32,
            steps: 1200,
            burn_in: 200,
            thin: 1,
            a: 2.0,
            stuck_after: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcRun {
    /// Post-burn-in positions, flattened step-major.
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
}

/// Goodman-Weare stretch-move ensemble targeting the uniform density on
/// the box `[lower, upper]` of any dimension.
pub fn ensemble_mcmc(lower: &[f64], upper: &[f64], settings: &McmcSettings, seed: u64) -> Result<McmcRun> {
    let dim = lower.len();
    if dim == 0 || upper.len() != dim {
        return Err(Error::LengthMismatch(lower.len(), upper.len()));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(Error::param("bounds", "need lower < upper in every dimension"));
    }
    let McmcSettings {
        walkers,
        steps,
        burn_in,
        thin,
        a,
        stuck_after,
    } = *settings;
    if walkers < 2 * dim {
        return Err(Error::param("walkers", format!("need at least {} walkers, got {walkers}", 2 * dim)));
    }
    if steps <= burn_in {
        return Err(Error::param("steps", "must exceed burn_in"));
    }
    if !(a > 1.0) {
        return Err(Error::param("a", "stretch scale must be > 1"));
    }
    let thin = thin.max(1);
    let inside = |x: &[f64]| x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| v >= l && v <= u);

    let mut rng = seed::rng(seed);
    let mut ens: Vec<Vec<f64>> = (0..walkers)
        .map(|_| (0..dim).map(|i| lower[i] + rng.random::<f64>() * (upper[i] - lower[i])).collect())
        .collect();
    let mut samples = Vec::with_capacity((steps - burn_in) / thin * walkers);
    let mut accepted_total = 0usize;
    let mut proposed_total = 0usize;
    let mut idle = 0usize;
    let mut proposal = vec![0.0; dim];
    for step in 0..steps {
        let mut accepted = 0;
        for j in 0..walkers {
            let mut k = rng.random_range(0..walkers - 1);
            if k >= j {
                k += 1;
            }
            let u: f64 = rng.random();
            let z = ((a - 1.0) * u + 1.0).powi(2) / a;
            for i in 0..dim {
                proposal[i] = ens[k][i] + z * (ens[j][i] - ens[k][i]);
            }
            // target is flat inside the box, so the ratio is the indicator
            if inside(&proposal) {
                let p_accept = z.powi(dim as i32 - 1);
                if p_accept >= 1.0 || rng.random::<f64>() < p_accept {
                    ens[j].copy_from_slice(&proposal);
                    accepted += 1;
                }
            }
        }
        proposed_total += walkers;
        accepted_total += accepted;
        idle = if accepted == 0 { idle + 1 } else { 0 };
        if idle >= stuck_after {
            return Err(Error::Diagnostics(format!(
                "no walker moved for {stuck_after} consecutive steps (step {step})"
            )));
        }
        if step >= burn_in && (step - burn_in) % thin == 0 {
            samples.extend(ens.iter().cloned());
        }
    }
    let acceptance_rate = accepted_total as f64 / proposed_total as f64;
    if !(0.2..=0.8).contains(&acceptance_rate) {
        log::warn!("ensemble acceptance rate {acceptance_rate:.3} outside [0.2, 0.8]");
    }
    Ok(McmcRun {
        samples,
        acceptance_rate,
    })
}

/// Resample `measured` with replacement.
pub fn bootstrap_delta_t(measured: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    if measured.is_empty() {
        return Err(Error::InsufficientData("no systolic-interval measurements to bootstrap".into()));
    }
    let mut rng = seed::rng(seed);
    Ok((0..n).map(|_| measured[rng.random_range(0..measured.len())]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_box_inside_global() {
        ParamBounds::default_box().validate_within(&ParamBounds::global()).unwrap();
    }

    #[test]
    fn degenerate_box() {
        let eps = 1e-9;
        let lower = [1.0, 0.5, 0.02, 0.02, 0.2];
        let upper = lower.map(|v| v + eps);
        let b = ParamBounds::new(lower, upper).unwrap();
        for kind in [PriorKind::Uniform, PriorKind::TruncatedGaussian] {
            let prior = PriorSpec { kind, ..Default::default() };
            for t in sample_thetas(&prior, &b, 100, 3).unwrap() {
                for (v, l) in t.to_array().iter().zip(&lower) {
                    assert!((v - l).abs() <= eps);
                }
            }
        }
    }

    #[test]
    fn far_tail_prior_is_rejected() {
        let b = ParamBounds::default_box();
        let mut mean = b.midpoint();
        mean[0] = 3.0;
        let prior = PriorSpec::truncated_gaussian(Some(mean), Some([0.01; DIM]));
        assert!(matches!(sample_thetas(&prior, &b, 10, 0), Err(Error::MisspecifiedPrior(_))));
    }

    #[test]
    fn mcmc_rejects_small_ensembles() {
        let s = McmcSettings {
            walkers: 8,
            ..Default::default()
        };
        assert!(ensemble_mcmc(&[0.0; 5], &[1.0; 5], &s, 0).is_err());
    }

    #[test]
    fn bootstrap_draws_from_input() {
        assert_eq!(bootstrap_delta_t(&[0.2], 5, 1).unwrap(), vec![0.2; 5]);
        assert!(bootstrap_delta_t(&[], 5, 1).is_err());
        let set = [0.18, 0.2, 0.22];
        assert!(bootstrap_delta_t(&set, 100, 2).unwrap().iter().all(|v| set.contains(v)));
    }

    #[test]
    fn prior_kind_parses() {
        assert_eq!("ensemble_mcmc".parse::<PriorKind>().unwrap(), PriorKind::EnsembleMcmc);
        assert!("banana".parse::<PriorKind>().is_err());
    }
}

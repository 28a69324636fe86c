use proptest::prelude::*;

use fpcg::analysis::{self, PreprocConfig};
use fpcg::api::{self, SynthesizeRequest};
use fpcg::calibration::{summarize_parameters, FitResult, SummaryOptions};
use fpcg::config::{self, SimConfig, SCHEMA};
use fpcg::heart::CycleTheta;
use fpcg::sampler::{sample_thetas, ParamBounds, PriorSpec};
use fpcg::simulate::simulate;

fn prior_strategy() -> impl Strategy<Value = PriorSpec> {
    prop_oneof![
        Just(PriorSpec::uniform()),
        Just(PriorSpec::truncated_gaussian(None, None)),
        Just(PriorSpec::mcmc(16, 50)),
    ]
}

fn box_strategy() -> impl Strategy<Value = ParamBounds> {
    let g = ParamBounds::global();
    let sides: Vec<_> = (0..5)
        .map(|i| {
            let (lo, hi) = (g.lower[i], g.upper[i]);
            (0.0..0.45f64, 0.55..1.0f64).prop_map(move |(a, b)| (lo + a * (hi - lo), lo + b * (hi - lo)))
        })
        .collect();
    sides.prop_map(|v| {
        let lower = std::array::from_fn(|i| v[i].0);
        let upper = std::array::from_fn(|i| v[i].1);
        ParamBounds::new(lower, upper).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_sampler_stays_in_the_box(prior in prior_strategy(), bounds in box_strategy(), seed in any::<u64>()) {
        let thetas = sample_thetas(&prior, &bounds, 300, seed).unwrap();
        prop_assert_eq!(thetas.len(), 300);
        for t in thetas {
            prop_assert!(bounds.contains(&t.to_array()));
        }
    }

    #[test]
    fn mixture_is_sum_of_components(
        seed in any::<u64>(),
        snr in 0.0..25.0f64,
        cycles in 5usize..25,
        movement in any::<bool>(),
        uc in any::<bool>(),
    ) {
        let mut cfg = SimConfig::default();
        cfg.noise.snr_db = snr;
        cfg.cycles_per_sample = cycles;
        cfg.set("movement_enabled", &movement.to_string()).unwrap();
        cfg.set("uc_enabled", &uc.to_string()).unwrap();
        let rec = simulate(&cfg, seed).unwrap();
        let sum = rec.components.sum();
        prop_assert_eq!(sum.len(), rec.mixture.len());
        for (a, b) in rec.mixture.samples.iter().zip(&sum) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert_eq!(rec, simulate(&cfg, seed).unwrap());
    }

    #[test]
    fn ini_round_trip(seed in any::<u64>(), fhr in 110.0..170.0f64, beta1 in 40.0..160.0f64, snr in 0.0..30.0f64) {
        let mut cfg = SimConfig::default();
        cfg.seed = seed;
        cfg.set("fhr", &fhr.to_string()).unwrap();
        cfg.set("beta1", &beta1.to_string()).unwrap();
        cfg.set("snr_db", &snr.to_string()).unwrap();
        let back = config::load_config(&cfg.to_ini(), false).unwrap();
        prop_assert_eq!(back.config, cfg);
    }

    #[test]
    fn summary_ignores_fit_order(raw in prop::collection::vec(prop::array::uniform5(0.0..1.0f64), 5..30), shuffle in any::<u64>()) {
        let g = ParamBounds::global();
        let fits: Vec<FitResult> = raw
            .iter()
            .enumerate()
            .map(|(i, u)| FitResult {
                theta: CycleTheta::from_array(std::array::from_fn(|k| g.lower[k] + u[k] * (g.upper[k] - g.lower[k]))),
                residual_rms: 0.0,
                converged: true,
                iterations: 1,
                cycle_index: i,
            })
            .collect();
        let mut shuffled = fits.clone();
        let n = shuffled.len();
        let mut s = shuffle;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let opts = SummaryOptions::default();
        let a = summarize_parameters(&fits, &opts).unwrap();
        let b = summarize_parameters(&shuffled, &opts).unwrap();
        prop_assert_eq!(a.mean, b.mean);
        prop_assert_eq!(a.covariance, b.covariance);
        prop_assert_eq!(a.bounds, b.bounds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn stats_are_scale_invariant(seed in any::<u64>(), gain in 0.01..100.0f64) {
        let cfg = SimConfig { cycles_per_sample: 40, ..SimConfig::default() };
        let rec = simulate(&cfg, seed).unwrap();
        let pc = PreprocConfig::default();
        let a = analysis::analyze(&rec.mixture, &pc).unwrap();
        let b = analysis::analyze(&rec.mixture.scaled(gain), &pc).unwrap();
        prop_assert!((a.t0 - b.t0).abs() < 1e-12);
        for (x, y) in a.acf.value.iter().zip(&b.acf.value) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.psd.db.iter().zip(&b.psd.db) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn acf_is_bounded(seed in any::<u64>(), snr in 0.0..25.0f64) {
        let mut cfg = SimConfig { cycles_per_sample: 30, ..SimConfig::default() };
        cfg.noise.snr_db = snr;
        let rec = simulate(&cfg, seed).unwrap();
        let a = analysis::analyze(&rec.mixture, &PreprocConfig::default()).unwrap();
        prop_assert!((a.acf.value[0] - 1.0).abs() < 1e-9);
        for v in &a.acf.value {
            prop_assert!(v.is_finite() && v.abs() <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn every_schema_key_reaches_ini_overrides_and_api() {
    let base = SimConfig::default();
    for spec in SCHEMA {
        let value = base.get(spec.key).unwrap_or_else(|| panic!("`{}` has no getter", spec.key));
        let ini = format!("[{}]\n{} = {}\n", spec.section, spec.key, value);
        let loaded = config::load_config(&ini, false).unwrap();
        assert!(loaded.warnings.is_empty(), "{}: {:?}", spec.key, loaded.warnings);
        assert_eq!(loaded.config, base, "{}", spec.key);

        let over = config::apply_overrides(base.clone(), [(spec.key, value.as_str())], false).unwrap();
        assert_eq!(over.config, base, "{}", spec.key);

        let req: SynthesizeRequest = serde_json::from_value(serde_json::json!({
            "preset": "normal",
            "overrides": { spec.key: value },
        }))
        .unwrap();
        let (cfg, _) = api::request_config(&req).unwrap_or_else(|e| panic!("{}: {e:?}", spec.key));
        assert_eq!(cfg.get(spec.key), Some(value), "{}", spec.key);
    }
}

#[test]
fn unknown_keys_are_rejected_by_overrides() {
    assert!(config::apply_overrides(SimConfig::default(), [("no_such_key", "1")], false).is_err());
}

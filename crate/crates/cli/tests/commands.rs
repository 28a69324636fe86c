use std::path::Path;
use std::process::Command;

fn fpcg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fpcg"))
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn simulate_into(dir: &Path, extra: &[&str]) {
    let mut c = fpcg();
    c.args(["simulate", "--seed", "4", "--out"]).arg(dir);
    c.args(["--set", "num_samples=1", "--set", "cycles_per_sample=40"]);
    c.args(extra);
    ok(&mut c);
}

#[test]
fn presets_list_and_show() {
    let list = ok(fpcg().args(["presets", "list"]));
    for name in ["normal", "prolonged_systole", "s2_dominant", "low_snr"] {
        assert!(list.contains(name), "{name}");
    }
    let show = ok(fpcg().args(["presets", "show", "low_snr"]));
    assert!(show.contains("snr_db = 5"));
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path(), &[]);
    simulate_into(b.path(), &[]);
    for f in ["fpcg_000.wav", "fpcg_000.json", "config.ini"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("fpcg_000.json")).unwrap()).unwrap();
    assert_eq!(side["annotations"]["onsets"].as_array().unwrap().len(), 40);
}

#[test]
fn validate_self_is_zero() {
    let d = tempfile::tempdir().unwrap();
    simulate_into(d.path(), &[]);
    let wav = d.path().join("fpcg_000.wav");
    let report = d.path().join("report.json");
    ok(fpcg().arg("validate").arg("--real").arg(&wav).arg("--sim").arg(&wav).arg("--out").arg(&report));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["acf_rmse"].as_f64().unwrap(), 0.0);
    assert_eq!(r["psd_rmse_db"].as_f64().unwrap(), 0.0);
    assert!((r["envelope_corr"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn calibrate_writes_summary_and_corner_data() {
    let d = tempfile::tempdir().unwrap();
    simulate_into(d.path(), &["--preset", "clean"]);
    let out = d.path().join("cal").join("summary.json");
    ok(fpcg()
        .arg("calibrate")
        .arg("--input")
        .arg(d.path().join("fpcg_000.wav"))
        .arg("--out")
        .arg(&out)
        .args(["--corner-samples", "2000"]));
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert!(s["n_converged"].as_u64().unwrap() >= 5);
    for f in ["summary_fits.csv", "summary_corner_samples.csv", "summary_histograms.csv", "summary_pairs.csv", "summary_box.ini"] {
        assert!(d.path().join("cal").join(f).exists(), "{f}");
    }
    // the fitted box feeds straight back into simulate
    let again = tempfile::tempdir().unwrap();
    let mut c = fpcg();
    c.args(["simulate", "--out"]).arg(again.path()).arg("--config").arg(d.path().join("cal/summary_box.ini"));
    c.args(["--set", "num_samples=1", "--set", "cycles_per_sample=10"]);
    ok(&mut c);
}

#[test]
fn exit_codes() {
    let usage = fpcg().args(["simulate"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let usage = fpcg().args(["frobnicate"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));

    let d = tempfile::tempdir().unwrap();
    let missing = fpcg().arg("calibrate").arg("--input").arg(d.path().join("none.wav")).arg("--out").arg(d.path().join("s.json")).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("none.wav"));

    let strict = fpcg().args(["simulate", "--strict", "--set", "fhr=500", "--out"]).arg(d.path()).output().unwrap();
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("fhr"));
}

#[test]
fn csv_export_and_component_files() {
    let d = tempfile::tempdir().unwrap();
    simulate_into(d.path(), &["--format", "csv", "--components"]);
    assert!(d.path().join("fpcg_000.csv").exists());
    assert!(d.path().join("fpcg_000_noise.wav").exists());
}

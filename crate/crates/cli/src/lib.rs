//! Command implementations and the HTTP router for the `fpcg` binary.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fpcg::analysis::{compare_stats, PreprocConfig};
use fpcg::api::{self, ApiError};
use fpcg::calibration::{self, CalibrationConfig, FitDomain};
use fpcg::config::{self, SimConfig, PRESETS};
use fpcg::io::{self, ExportFormat, WavSample};
use fpcg::seed::derive_indexed;
use fpcg::simulate::simulate;

#[derive(Debug, Parser)]
#[command(name = "fpcg", version, about = "Fetal phonocardiogram simulator, calibration and validation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate recordings with ground-truth sidecars.
    Simulate(SimulateArgs),
    /// Fit per-cycle parameters to a recording and summarize them.
    Calibrate(CalibrateArgs),
    /// Compare envelope ACF and PSD statistics of two recordings.
    Validate(ValidateArgs),
    /// List or print the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Serve the JSON synthesis API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum PresetAction {
    List,
    Show { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    /// 32-bit float WAV
    Wav,
    /// 16-bit PCM WAV, peak-normalized
    Wav16,
    Csv,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// INI configuration; applied on top of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Master seed (overrides the config value).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum, default_value_t = OutFormat::Wav)]
    pub format: OutFormat,
    /// Also write one WAV per component.
    #[arg(long)]
    pub components: bool,
    /// Treat out-of-range values as errors.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Waveform,
    Envelope,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// WAV or CSV recording.
    #[arg(long)]
    pub input: PathBuf,
    /// Summary JSON; companion CSVs are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling rate for headerless CSV input.
    #[arg(long)]
    pub fs: Option<f64>,
    /// Resample to this rate before analysis.
    #[arg(long)]
    pub resample: Option<f64>,
    #[arg(long, value_enum, default_value_t = DomainArg::Waveform)]
    pub domain: DomainArg,
    /// Carrier frequencies used by the fit model, Hz.
    #[arg(long, default_value_t = 40.0)]
    pub f0_s1: f64,
    #[arg(long, default_value_t = 50.0)]
    pub f0_s2: f64,
    #[arg(long, default_value_t = 2.0)]
    pub dispersion: f64,
    #[arg(long, default_value_t = 10_000)]
    pub corner_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub sim: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sampling rate for headerless CSV input.
    #[arg(long)]
    pub fs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => run_simulate(&a),
        Command::Calibrate(a) => run_calibrate(&a),
        Command::Validate(a) => run_validate(&a),
        Command::Presets { action } => run_presets(&action),
        Command::Serve(a) => run_serve(&a),
    }
}

/// Preset, then INI file, then `--set` overrides, then `--seed`.
pub fn build_config(a: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg = match &a.preset {
        Some(name) => config::preset_config(name)?,
        None => SimConfig::default(),
    };
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let loaded = config::apply_ini(cfg, &text, a.strict).with_context(|| format!("in {}", path.display()))?;
        cfg = loaded.config;
    }
    let mut pairs = Vec::new();
    for s in &a.set {
        let Some((k, v)) = s.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{s}`");
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    cfg = config::apply_overrides(cfg, pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())), a.strict)?.config;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = build_config(a)?;
    let format = match a.format {
        OutFormat::Wav => ExportFormat::Wav(WavSample::Float32),
        OutFormat::Wav16 => ExportFormat::Wav(WavSample::Pcm16),
        OutFormat::Csv => ExportFormat::Csv,
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    std::fs::write(a.out.join("config.ini"), cfg.to_ini()).context("writing config snapshot")?;
    for i in 0..cfg.num_samples {
        let seed = derive_indexed(cfg.seed, "recording", i as u64);
        let rec = simulate(&cfg, seed)?;
        let stem = format!("fpcg_{i:03}");
        let paths = io::export(&rec, format, &a.out, &stem)?;
        if a.components {
            io::export_components(&rec, &a.out, &stem)?;
        }
        log::info!("wrote {}", paths[0].display());
    }
    println!("{} recording(s) written to {}", cfg.num_samples, a.out.display());
    Ok(())
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("summary");
    out.with_file_name(format!("{stem}{suffix}"))
}

fn run_calibrate(a: &CalibrateArgs) -> Result<()> {
    let x = io::ingest_recording(&a.input, a.fs, a.resample)?;
    let mut cfg = CalibrationConfig {
        corner_samples: a.corner_samples,
        seed: a.seed,
        ..CalibrationConfig::default()
    };
    cfg.hyper.f0_s1 = a.f0_s1;
    cfg.hyper.f0_s2 = a.f0_s2;
    cfg.fit.domain = match a.domain {
        DomainArg::Waveform => FitDomain::Waveform,
        DomainArg::Envelope => FitDomain::Envelope,
    };
    cfg.summary.dispersion_mult = a.dispersion;
    let rep = calibration::calibrate(&x, &cfg)?;
    let converged = rep.fits.iter().filter(|f| f.converged).count();
    let summary = json!({
        "input": a.input.display().to_string(),
        "fs": rep.fs,
        "t0": rep.t0,
        "n_cycles": rep.n_cycles,
        "n_converged": converged,
        "summary": rep.summary,
        "delta_t_measured": rep.delta_t_measured,
        "histograms": rep.corner.histograms,
    });
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&a.out, serde_json::to_string_pretty(&summary)?)?;
    std::fs::write(with_suffix(&a.out, "_fits.csv"), calibration::fits_csv(&rep.fits))?;
    std::fs::write(with_suffix(&a.out, "_corner_samples.csv"), rep.corner.samples_csv())?;
    std::fs::write(with_suffix(&a.out, "_histograms.csv"), rep.corner.histograms_csv())?;
    std::fs::write(with_suffix(&a.out, "_pairs.csv"), rep.corner.pairs_csv())?;
    std::fs::write(with_suffix(&a.out, "_box.ini"), box_ini(&rep.summary.bounds))?;
    println!(
        "{} cycles, {} converged; summary written to {}",
        rep.n_cycles,
        converged,
        a.out.display()
    );
    Ok(())
}

/// The fitted box as an INI fragment usable with `simulate --config`.
fn box_ini(b: &fpcg::sampler::ParamBounds) -> String {
    let keys = ["A_S1_range", "A_S2_range", "tau_S1_range", "tau_S2_range", "deltaT_range"];
    let mut s = String::from("[sampling]\n");
    for (i, k) in keys.iter().enumerate() {
        s.push_str(&format!("{k} = ({}, {})\n", b.lower[i], b.upper[i]));
    }
    s
}

fn run_validate(a: &ValidateArgs) -> Result<()> {
    let real = io::ingest_recording(&a.real, a.fs, None)?;
    let sim = io::ingest_recording(&a.sim, a.fs, None)?;
    let rep = compare_stats(&real, &sim, &PreprocConfig::default())?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&a.out, serde_json::to_string_pretty(&rep)?)?;
    println!(
        "acf_rmse {:.4}  psd_rmse_db {:.3}  envelope_corr {:.3}",
        rep.acf_rmse, rep.psd_rmse_db, rep.envelope_corr
    );
    Ok(())
}

fn run_presets(action: &PresetAction) -> Result<()> {
    match action {
        PresetAction::List => {
            for p in PRESETS {
                println!("{:<18} {}", p.name, p.description);
            }
        }
        PresetAction::Show { name } => {
            let cfg = config::preset_config(name)?;
            print!("{}", cfg.to_ini());
        }
    }
    Ok(())
}

fn run_serve(a: &ServeArgs) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .with_context(|| format!("bad address {}:{}", a.host, a.port))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        log::info!("listening on {addr}");
        println!("serving on http://{addr}");
        axum::serve(listener, router()).await?;
        Ok(())
    })
}

/// `GET /presets`, `POST /synthesize`, `POST /validate`.
pub fn router() -> Router {
    Router::new()
        .route("/presets", get(presets_handler))
        .route("/synthesize", post(synthesize_handler))
        .route("/validate", post(validate_handler))
}

fn json_response<T: serde::Serialize>(status: StatusCode, body: &T) -> Response {
    match serde_json::to_vec(body) {
        Ok(bytes) => (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn error_response(e: &ApiError) -> Response {
    let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    json_response(status, e)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> std::result::Result<T, ApiError> {
    let body = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError {
        status: 400,
        error: format!("invalid request body: {e}"),
        field: None,
        stage: None,
    })
}

async fn blocking<T, F>(f: F) -> Response
where
    T: serde::Serialize + Send + 'static,
    F: FnOnce() -> std::result::Result<T, ApiError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(v)) => json_response(StatusCode::OK, &v),
        Ok(Err(e)) => error_response(&e),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn presets_handler() -> Response {
    blocking(api::presets).await
}

async fn synthesize_handler(body: Bytes) -> Response {
    match parse_body::<api::SynthesizeRequest>(&body) {
        Ok(req) => blocking(move || api::synthesize(&req)).await,
        Err(e) => error_response(&e),
    }
}

async fn validate_handler(body: Bytes) -> Response {
    match parse_body::<api::ValidateRequest>(&body) {
        Ok(req) => blocking(move || api::validate(&req)).await,
        Err(e) => error_response(&e),
    }
}

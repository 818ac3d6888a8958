//! Configuration-driven experiment runner behind the `rupkit` binary.
//!
//! ```text
//! rupkit <sample | mise-sweep | bandwidth-vs-n | kl-check | estimate-tau>
//!        [--config <path>] [--seed <u64>] [--out <dir>] [--threads <k>] [--strict]
//! ```
//!
//! Exit codes: 0 success, 1 runtime or IO failure, 2 configuration error,
//! 3 warnings raised under `--strict`.
//!
//! Each run writes its outputs, `config.resolved.toml`, and
//! `manifest.json` (config echo, version, timestamps, SHA-256 of every
//! output) into the output directory.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::Artifacts;
pub use config::{ConfigError, ExperimentConfig};

use crate::error::Error;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Parser)]
#[command(name = "rupkit", version, about = "Regression experiments under random unbiased perturbations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for the Monte Carlo loops.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Exit with status 3 when the run raises warnings.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Draw perturbations and datasets; write dataset.csv and realization.json.
    Sample,
    /// MISE curves over the bandwidth grid for each tau; mise_curve.csv and fig4.svg.
    MiseSweep,
    /// MISE-optimal bandwidth for each (n, tau); hstar_vs_n.csv and fig5.svg.
    BandwidthVsN,
    /// KL scaling of the two-point construction; kl_scaling.csv.
    KlCheck,
    /// Estimate tau from per-realization means; tau_estimate.csv.
    EstimateTau {
        /// Dataset CSVs (x,y,bucket_id,realization_id); simulate when absent.
        #[arg(long)]
        input: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::MiseSweep => "mise-sweep",
            Command::BandwidthVsN => "bandwidth-vs-n",
            Command::KlCheck => "kl-check",
            Command::EstimateTau { .. } => "estimate-tau",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] Error),
    #[error("{} warning(s) raised under --strict", .0.len())]
    Warnings(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Warnings(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputFile>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Resolve the configuration from the file and flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                path: String::new(),
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => {
            let seed = cli.seed.ok_or_else(|| ConfigError {
                path: "seed".into(),
                message: "required: pass --seed or a --config file that sets it".into(),
            })?;
            ExperimentConfig::with_seed(seed)
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), Error> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Run one subcommand end to end.
pub fn run(cli: &Cli) -> Result<RunSummary, CliError> {
    let cfg = resolve_config(cli)?;
    if cli.threads == Some(0) {
        return Err(ConfigError { path: "--threads".into(), message: "must be >= 1".into() }.into());
    }
    let started = unix_now();
    let work = || -> Result<Artifacts, Error> {
        match &cli.command {
            Command::Sample => commands::sample(&cfg),
            Command::MiseSweep => commands::mise_sweep(&cfg),
            Command::BandwidthVsN => commands::bandwidth_vs_n(&cfg),
            Command::KlCheck => commands::kl_check(&cfg),
            Command::EstimateTau { input } => commands::estimate_tau(&cfg, input),
        }
    };
    let artifacts = match cli.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::DegenerateInput(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut outputs = Vec::with_capacity(artifacts.files.len());
    for (name, contents) in &artifacts.files {
        write_file(&dir, name, contents.as_bytes())?;
        outputs.push(OutputFile { file: name.clone(), sha256: sha256_hex(contents.as_bytes()), bytes: contents.len() });
    }
    write_file(&dir, "config.resolved.toml", cfg.to_toml().as_bytes())?;
    let manifest = RunManifest {
        toolkit: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: cli.command.name().into(),
        seed: cfg.seed,
        threads: cli.threads,
        started_unix: started,
        finished_unix: unix_now(),
        config: cfg,
        outputs,
        warnings: artifacts.warnings.clone(),
    };
    write_file(&dir, "manifest.json", (serde_json::to_string_pretty(&manifest).map_err(Error::from)? + "\n").as_bytes())?;

    for w in &artifacts.warnings {
        eprintln!("warning: {w}");
    }
    if cli.strict && !artifacts.warnings.is_empty() {
        return Err(CliError::Warnings(artifacts.warnings));
    }
    Ok(RunSummary { out_dir: dir, manifest })
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(summary) => {
            for f in &summary.manifest.outputs {
                println!("{}", summary.out_dir.join(&f.file).display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! `nls-ground`: command-line front end for the ground-state solver.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nls_core::config::load_config;
use nls_core::manifest::{sha256_hex, RunDir, RunManifest};
use nls_core::NlsError;

/// Environment variable naming the default root for run directories.
pub const OUTPUT_ROOT_VAR: &str = "NLS_OUTPUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "nls-ground", version, about = "Nehari-manifold ground states for NLS equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; defaults to the config's output_dir, then to
    /// $NLS_OUTPUT_ROOT/<command>-<config name>.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for independent sweep entries.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Check the model hypotheses and the spectral floor.
    Validate,
    /// Smallest eigenvalue of −Δ + V.
    Spectrum,
    /// Compute a ground state.
    Solve,
    /// Solve along a family of models.
    Sweep,
    /// Scan fiber maps of random fields.
    Fiber,
    /// Fit the exponential tail of the ground state.
    Decay,
    /// Compare the ground-state level with the purely periodic one.
    Compare,
    /// Translation curve and drift run for a repulsive defect.
    Nonexist,
    /// Split a field into separated bumps.
    Decompose,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Spectrum => "spectrum",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Fiber => "fiber",
            Command::Decay => "decay",
            Command::Compare => "compare",
            Command::Nonexist => "nonexist",
            Command::Decompose => "decompose",
        }
    }
}

pub const EXIT_REFUSED: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// Exit code for an error that aborted a run.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<NlsError>() {
            return match e {
                NlsError::Io(_) => EXIT_IO,
                NlsError::NoConvergence { .. } | NlsError::BracketFailure { .. } | NlsError::NonFinite(_) => {
                    EXIT_NOT_CONVERGED
                }
                _ => EXIT_REFUSED,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_REFUSED
}

fn output_dir(cli: &Cli, config_path: &Path, from_config: Option<&Path>) -> PathBuf {
    if let Some(o) = &cli.output {
        return o.clone();
    }
    if let Some(o) = from_config {
        return o.to_path_buf();
    }
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let root = std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{}-{stem}", cli.command.name()))
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let config_path = cli.config.as_ref().context("--config is required")?;
    let (mut cfg, text) = load_config(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = output_dir(cli, config_path, cfg.output_dir.as_deref());
    let mut run_dir = RunDir::create(&dir)?;
    run_dir.write("config.toml", text.as_bytes())?;

    let ctx = commands::Context {
        cfg: &cfg,
        jobs: cli.jobs.max(1),
    };
    let outcome = commands::dispatch(cli.command, &ctx, &mut run_dir);
    let (outcome, failure) = match outcome {
        Ok(o) => (o, None),
        Err(e) => {
            let code = classify(&e);
            (commands::Outcome::failed(code, format!("{e:#}")), Some(e))
        }
    };

    let manifest = RunManifest {
        command: cli.command.name().into(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(text.as_bytes()),
        seed: cfg.seed,
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        exit_code: outcome.exit_code as i32,
        status: outcome.status.clone(),
        hypotheses: outcome.hypotheses.clone(),
        spectrum: outcome.spectrum.clone(),
        files: Vec::new(),
    };
    run_dir.finish(manifest)?;
    eprintln!("{}: {} ({})", cli.command.name(), outcome.status, dir.display());
    if let Some(e) = failure {
        eprintln!("error: {e:#}");
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_REFUSED } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

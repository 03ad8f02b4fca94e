//! Reproducible experiment runner: config resolution, the four subcommands,
//! and the run manifest. The `treealign` binary is a thin wrapper over
//! [`run`]; everything here is library code so the same entry points are
//! usable programmatically.
//!
//! Determinism contract: with an identical config and seed, every data file
//! (CSV, JSONL, bundle) is byte-identical across runs. All randomness flows
//! through [`crate::trees::Seed`] child streams indexed by task and trial;
//! wall-clock time appears only in `manifest.json`.

mod commands;
mod config;

pub use commands::{cmd_align, cmd_gen, cmd_phase, cmd_tree_sim, CSV_HEADER};
pub use config::{
    resolve_align, resolve_gen, resolve_phase, resolve_tree_sim, Algo, AlignPlan, ExperimentConfig,
    GenPlan, PhasePlan, RunArgs, TreeSimPlan,
};

use crate::Result;
use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(
    name = "treealign",
    version,
    about = "Tree correlation detection and message-passing graph alignment experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo sweep of tree-pair log-likelihood ratios over a grid.
    TreeSim(RunArgs),
    /// Analytic phase-diagram scan with per-point verdicts.
    Phase(RunArgs),
    /// Run an aligner (mpalign / mpalign2) on sampled or loaded graph pairs.
    Align(RunArgs),
    /// Generate a correlated graph-pair bundle directory.
    Gen(RunArgs),
}

/// One digested output file of a run.
#[derive(Debug, Clone, Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to rerun and verify a command: the resolved config, the
/// master seed and derivation scheme, and digests of every data file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub wall_clock_secs: f64,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputDigest>,
}

fn digest_outputs(files: &[PathBuf]) -> Result<Vec<OutputDigest>> {
    files
        .iter()
        .map(|path| {
            let bytes = std::fs::read(path)?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            Ok(OutputDigest {
                path: path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string()),
                bytes: bytes.len() as u64,
                sha256: format!("{:x}", hasher.finalize()),
            })
        })
        .collect()
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    config: serde_json::Value,
    started: Instant,
    files: &[PathBuf],
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: seed,
        seed_derivation: "ChaCha8(sha256(seed, path)); paths index task and trial".to_string(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        config,
        outputs: digest_outputs(files)?,
    };
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Execute a parsed command line. Returns the output directory.
pub fn run(cli: Cli) -> Result<PathBuf> {
    let started = Instant::now();
    let (name, args) = match &cli.command {
        Command::TreeSim(a) => ("tree-sim", a),
        Command::Phase(a) => ("phase", a),
        Command::Align(a) => ("align", a),
        Command::Gen(a) => ("gen", a),
    };
    let cfg = ExperimentConfig::from_args(args)?;
    let out_dir = cfg.out_dir();
    let (files, config_json, seed) = match &cli.command {
        Command::TreeSim(_) => {
            let plan = resolve_tree_sim(&cfg)?;
            let files = cmd_tree_sim(&plan, &out_dir)?;
            (files, serde_json::to_value(&plan)?, plan.seed)
        }
        Command::Phase(_) => {
            let plan = resolve_phase(&cfg)?;
            let files = cmd_phase(&plan, &out_dir)?;
            (files, serde_json::to_value(&plan)?, plan.seed)
        }
        Command::Align(_) => {
            let plan = resolve_align(&cfg)?;
            let files = cmd_align(&plan, &out_dir)?;
            (files, serde_json::to_value(&plan)?, plan.seed)
        }
        Command::Gen(_) => {
            let plan = resolve_gen(&cfg)?;
            let files = cmd_gen(&plan, &out_dir)?;
            (files, serde_json::to_value(&plan)?, plan.seed)
        }
    };
    write_manifest(&out_dir, name, seed, config_json, started, &files)?;
    Ok(out_dir)
}

/// Binary entry point: parse, run, report.
pub fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out_dir) => {
            println!("wrote {}", out_dir.display());
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

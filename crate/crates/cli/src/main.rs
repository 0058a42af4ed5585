//! `amvf`: configuration-driven runner for mean value, DPP and game experiments.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::{ExperimentConfig, Overrides};
use experiments::RunError;

#[derive(Parser)]
#[command(name = "amvf", version, about = "Run asymptotic mean value, DPP and tug-of-war experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Parse and check a config file without running it.
    Validate(RunArgs),
    /// Print the registered test functions.
    ListTestFunctions,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_episodes: Option<usize>,
    #[arg(long)]
    n_c: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = "AMVF_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            n_episodes: self.n_episodes,
            n_c: self.n_c,
            h: self.h,
            output_dir: self.output_dir.clone(),
            threads: self.threads,
            eps: self.eps,
        }
    }

    fn load(&self) -> Result<ExperimentConfig, RunError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct ArtifactEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    config_hash: String,
    config: ExperimentConfig,
    amvf_version: &'static str,
    wall_time_s: f64,
    artifacts: Vec<ArtifactEntry>,
}

fn sha256_file(path: &std::path::Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn run(args: &RunArgs) -> Result<PathBuf, RunError> {
    let cfg = args.load()?;
    let dir = experiments::output_dir(&cfg, args.output_root.as_deref());
    let start = Instant::now();
    let files = experiments::run(&cfg, &dir)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut artifacts = Vec::new();
    for f in files {
        let sha256 = sha256_file(&f).map_err(|source| RunError::Output { path: f.clone(), source })?;
        let path = f.strip_prefix(&dir).unwrap_or(&f).to_string_lossy().replace('\\', "/");
        artifacts.push(ArtifactEntry { path, sha256 });
    }
    let manifest = Manifest { config_hash: cfg.hash(), config: cfg, amvf_version: env!("CARGO_PKG_VERSION"), wall_time_s, artifacts };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|source| RunError::Output { path, source })?;
    Ok(dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ListTestFunctions => {
            for (name, desc) in amvf_core::functions::REGISTRY {
                println!("{name:<10} {desc}");
            }
            Ok(())
        }
        Command::Validate(args) => args.load().and_then(|cfg| experiments::validate(&cfg)).map(|_| println!("ok")),
        Command::Run(args) => run(args).map(|dir| println!("{}", dir.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line driver for the named experiments.
//!
//! `NECKHARM_THREADS` caps the worker pool; results do not depend on it.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neckharm::config::{ExperimentConfig, ExperimentName};
use neckharm::experiments;

#[derive(Parser)]
#[command(name = "neckharm", version, about = "Run harmonic-mode experiments on necked model manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a TOML config; exits non-zero if any criterion fails.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiment names.
    List,
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("NECKHARM_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("NECKHARM_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("NECKHARM_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::List => {
            for e in ExperimentName::ALL {
                println!("{:<20} {}", e.as_str(), e.describe());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("ok: {} -> {}", cfg.experiment, cfg.output_dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, out } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            match experiments::run(&cfg) {
                Ok((outcome, files)) => {
                    for c in &outcome.summary.criteria {
                        println!("{} {}: {:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
                    }
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                    if outcome.summary.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

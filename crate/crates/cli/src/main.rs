//! Command-line front end: `run` executes a configured sweep and writes the
//! CSV artifacts; `selftest` runs the library's invariant checks.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use quantlink::config::ExperimentConfig;
use quantlink::selftest::{all_passed, run_selftest};
use quantlink::sweep::run_sweep;

/// Environment variable consulted for the worker count when `--workers` is
/// not given.
const WORKERS_ENV: &str = "QUANTLINK_WORKERS";

#[derive(Parser)]
#[command(
    name = "quantlink",
    about = "Link-level simulator comparing fronthaul transport of quantized \
             OFDM uplink signals against solver-based reconstruction",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and write CSV outputs.
    Run {
        /// Path to a `key = value` config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for sweep, plot, and audit CSV files.
        #[arg(long)]
        out: PathBuf,
        /// Override the number of trials per sweep cell.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker thread count (default: QUANTLINK_WORKERS, then all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run fast invariant checks and report PASS/FAIL per check.
    Selftest,
}

fn resolve_workers(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(value) => {
            let workers: usize = value
                .trim()
                .parse()
                .with_context(|| format!("{WORKERS_ENV} must be a thread count, got {value:?}"))?;
            Ok(Some(workers))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(format!("reading {WORKERS_ENV}")),
    }
}

fn run_command(
    config_path: &PathBuf,
    out_dir: &PathBuf,
    trials: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::load(config_path)
        .with_context(|| format!("loading config {}", config_path.display()))?;
    if let Some(trials) = trials {
        config.trials = trials;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate().context("validating config overrides")?;
    let workers = resolve_workers(workers)?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let started = std::time::Instant::now();
    let result = run_sweep(&config, workers).context("running sweep")?;
    let elapsed = started.elapsed();

    let sweep_path = out_dir.join("sweep.csv");
    result
        .write_csv(&sweep_path)
        .context("writing sweep table")?;
    println!("wrote {} ({} rows)", sweep_path.display(), result.rows.len());
    for path in result.emit_plot_data(out_dir).context("writing plot data")? {
        println!("wrote {}", path.display());
    }
    for path in result.write_audit(out_dir).context("writing audit trail")? {
        println!("wrote {}", path.display());
    }
    println!(
        "swept {} cells x {} trials in {:.2?}",
        result.rows.len() / 2,
        config.trials,
        elapsed
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            workers,
        } => run_command(&config, &out, trials, seed, workers),
        Command::Selftest => {
            let checks = run_selftest();
            for outcome in &checks {
                println!("{outcome}");
            }
            if all_passed(&checks) {
                println!("all {} checks passed", checks.len());
                Ok(())
            } else {
                let failed = checks.iter().filter(|c| !c.passed).count();
                anyhow::bail!("{failed} of {} checks failed", checks.len());
            }
        }
    }
}

//! `uvtdma` — deterministic simulator of a beacon-synchronized TDMA
//! optical scattering network.
//!
//! Exit codes: 0 success, 1 constraint/acceptance failure, 2 usage or
//! configuration error.

mod config;
mod report;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use uvtdma_core::sim::{run_with_options, Scenario, SimError};

#[derive(Parser)]
#[command(name = "uvtdma", version, about = "Beacon-synchronized TDMA optical network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario config against every admissibility constraint.
    Validate {
        config: PathBuf,
    },
    /// Run one scenario and write metrics.csv / sync_errors.csv
    /// (and trace.csv with --trace).
    Run {
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Emit the deterministic event trace.
        #[arg(long)]
        trace: bool,
        /// Output directory for the CSV files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run even if validation reports violations.
        #[arg(long)]
        force: bool,
    },
    /// Run one scenario per value of a swept config parameter and write
    /// a long-format sweep.csv.
    Sweep {
        config: PathBuf,
        /// Dotted config path, e.g. `slots.guard_symbols`.
        #[arg(long)]
        param: String,
        /// Comma-separated values to sweep over.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Base seed for the derived per-point seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run points even if validation reports violations.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Run { config, seed, trace, out, force } => {
            cmd_run(&config, seed, trace, &out, force)
        }
        Command::Sweep { config, param, values, seed, out, force } => {
            cmd_sweep(&config, &param, &values, seed, &out, force)
        }
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let cfg = config::load(path)?;
    let mut scenario = cfg.to_scenario()?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn cmd_validate(path: &Path) -> Result<u8> {
    let scenario = load_scenario(path, None)?;
    let stdout = std::io::stdout();
    let ok = report::validation_report(&scenario, &mut stdout.lock())?;
    Ok(if ok { 0 } else { 1 })
}

fn cmd_run(path: &Path, seed: Option<u64>, trace: bool, out: &Path, force: bool) -> Result<u8> {
    let scenario = load_scenario(path, seed)?;
    let (metrics, events) = match run_with_options(&scenario, force, trace) {
        Ok(result) => result,
        Err(SimError::InvalidScenario(violations)) => {
            eprintln!(
                "scenario fails validation ({} violations; use --force to run anyway):",
                violations.len()
            );
            for v in &violations {
                eprintln!("  {v}");
            }
            return Ok(1);
        }
        Err(e) => return Err(e.into()),
    };

    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    report::write_metrics_csv(&out.join("metrics.csv"), &metrics)?;
    report::write_sync_csv(&out.join("sync_errors.csv"), &metrics.sync_samples)?;
    if let Some(events) = events {
        report::write_trace_csv(&out.join("trace.csv"), &events)?;
    }
    let stdout = std::io::stdout();
    report::print_run_summary(&metrics, &mut stdout.lock())?;
    Ok(0)
}

fn cmd_sweep(
    path: &Path,
    param: &str,
    values: &[String],
    seed: Option<u64>,
    out: &Path,
    force: bool,
) -> Result<u8> {
    let table = config::load_table(path)?;
    let base_seed = match seed {
        Some(s) => s,
        None => config::from_table(table.clone())?.seed,
    };
    let points = sweep::run_sweep(&table, param, values, base_seed, force)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    sweep::write_sweep_csv(&out.join("sweep.csv"), param, &points)?;
    for point in &points {
        println!(
            "{param}={} seed={} overlaps={} correct={}",
            point.value,
            point.seed,
            point.metrics.overlap_events,
            point
                .metrics
                .per_node
                .iter()
                .map(|n| n.frame_correct_num)
                .sum::<u64>(),
        );
    }
    Ok(0)
}

//! Command-line harness: execute configured runs, replay traces, and run the
//! verification battery. Any failed invariant makes the process exit
//! nonzero with the failing check named on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use waa::config::{parse_config, Mode, RunConfig};
use waa::runner::{run, verify_suite};
use waa::trace::{parse_trace, render_trace, replay_checks};

/// Environment variable holding the base directory for relative output
/// paths.
const OUTPUT_DIR_ENV: &str = "WAA_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "waa",
    about = "Prediction with expert advice via the Weak Aggregating Algorithm",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Override the run's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the horizon (number of rounds).
    #[arg(long)]
    horizon: Option<usize>,
    /// Override the mode: deterministic, randomized, removal,
    /// removal-randomized.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run described by a JSON config; writes the configured
    /// trace/summary files and prints the summary to stdout.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the fixed verification battery (one pass/fail line per property).
    Verify {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute every check a trace file supports.
    Replay { trace: PathBuf },
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut config = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = overrides.seed {
        config.rng_seed = seed;
    }
    if let Some(horizon) = overrides.horizon {
        config.horizon = horizon;
    }
    if let Some(mode) = &overrides.mode {
        config.mode = mode.parse::<Mode>().map_err(|e| e.to_string())?;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn resolve_output(path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() {
        return p;
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(p),
        None => p,
    }
}

fn cmd_run(path: &Path, overrides: &Overrides) -> Result<bool, String> {
    let config = load_config(path, overrides)?;
    let out = run(&config).map_err(|e| e.to_string())?;
    if let Some(trace_path) = &config.output.trace {
        let resolved = resolve_output(trace_path);
        if let Some(parent) = resolved.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
            }
        }
        std::fs::write(&resolved, render_trace(&out.trace)).map_err(|e| e.to_string())?;
    }
    let summary_json =
        serde_json::to_string_pretty(&out.summary).map_err(|e| e.to_string())?;
    if let Some(summary_path) = &config.output.summary {
        let resolved = resolve_output(summary_path);
        if let Some(parent) = resolved.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
            }
        }
        std::fs::write(&resolved, &summary_json).map_err(|e| e.to_string())?;
    }
    println!("{summary_json}");
    if !out.summary.checks_passed {
        for f in &out.summary.failed_checks {
            eprintln!("check failed: {f}");
        }
    }
    Ok(out.summary.checks_passed)
}

fn cmd_verify(path: &Path, overrides: &Overrides) -> Result<bool, String> {
    let config = load_config(path, overrides)?;
    let report = verify_suite(&config).map_err(|e| e.to_string())?;
    for p in &report.properties {
        println!(
            "{} {} (worst margin {:.3e}) {}",
            if p.pass { "PASS" } else { "FAIL" },
            p.name,
            p.worst_margin,
            p.details
        );
    }
    Ok(report.passed)
}

fn cmd_replay(path: &Path) -> Result<bool, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let rows = parse_trace(&text).map_err(|e| e.to_string())?;
    let checks = replay_checks(&rows);
    let mut ok = true;
    for c in &checks {
        println!(
            "{} {} (worst {:.3e}){}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.detail.as_deref().map(|d| format!(" {d}")).unwrap_or_default()
        );
        ok &= c.pass;
    }
    println!("rounds: {}", rows.len());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, overrides } => cmd_run(config, overrides),
        Command::Verify { config, overrides } => cmd_verify(config, overrides),
        Command::Replay { trace } => cmd_replay(trace),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

//! `dcm-sim`: run, sweep and tune stepping scenarios from TOML configs.
//!
//! Exit codes: 0 completed, 1 configuration or input error, 2 diverged,
//! 3 simulation fault.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dcm_stepping::sim::{run_scenario, tune_step_timing, RunStatus, ScenarioConfig, TrajectoryLog};

#[derive(Parser)]
#[command(name = "dcm-sim", version, about = "Biped stepping stabilizer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV log and JSON summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario repeatedly while varying one numeric key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=start:end:count`, e.g. `timing_scale=1.0:1.5:6`.
        #[arg(long)]
        vary: String,
        /// Optional directory for per-run logs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find the step period that makes the uncontrolled rocking gait periodic.
    TuneTiming {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(status: RunStatus) -> u8 {
    match status {
        RunStatus::Completed => 0,
        RunStatus::Diverged => 2,
        RunStatus::Faulted => 3,
    }
}

fn status_name(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Completed => "completed",
        RunStatus::Diverged => "diverged",
        RunStatus::Faulted => "faulted",
    }
}

fn write_outputs(log: &TrajectoryLog, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    log.write_csv(&dir.join(format!("{stem}.csv")))?;
    log.write_summary(&dir.join(format!("{stem}_summary.json")))?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn parse_vary(arg: &str) -> Result<(String, Vec<f64>)> {
    let (key, range) = arg.split_once('=').context("expected key=start:end:count")?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        bail!("expected key=start:end:count, got '{arg}'");
    }
    let start: f64 = parts[0].parse().context("start")?;
    let end: f64 = parts[1].parse().context("end")?;
    let count: usize = parts[2].parse().context("count")?;
    if count == 0 {
        bail!("count must be positive");
    }
    let values = (0..count)
        .map(|k| if count == 1 { start } else { start + (end - start) * k as f64 / (count - 1) as f64 })
        .collect();
    Ok((key.to_string(), values))
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let log = run_scenario(&cfg)?;
            write_outputs(&log, &out, &stem(&config))?;
            let s = log.summary();
            println!(
                "{}: {} steps, max DCM error {:.4} m, max mod {:.4} m",
                status_name(s.status),
                s.steps_completed,
                s.max_dcm_error_m,
                s.max_mod_m
            );
            if let Some(m) = &s.message {
                println!("{m}");
            }
            Ok(exit_code(s.status))
        }
        Command::Sweep { config, vary, out } => {
            let base = ScenarioConfig::from_file(&config)?;
            let (key, values) = parse_vary(&vary)?;
            println!("{key},status,steps_completed,max_dcm_error_m,max_mod_m");
            for (k, v) in values.iter().enumerate() {
                let cfg = base.with_value(&key, *v)?;
                let log = run_scenario(&cfg)?;
                if let Some(dir) = &out {
                    write_outputs(&log, dir, &format!("{}_{k:03}", stem(&config)))?;
                }
                let s = log.summary();
                println!("{v},{},{},{:.6e},{:.6e}", status_name(s.status), s.steps_completed, s.max_dcm_error_m, s.max_mod_m);
            }
            Ok(0)
        }
        Command::TuneTiming { config } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let tune = tune_step_timing(&cfg)?;
            println!("step_period = {:?}", tune.step_period);
            println!("residual_m = {:.3e}", tune.residual);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

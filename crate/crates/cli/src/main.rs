mod checks;
mod config;
mod experiment;
mod report;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use wrdescent::traceio::read_trace_file;

use crate::config::{parse_assignment, read_value, set_key, ExperimentConfig};
use crate::sweep::Axis;

/// Exit code when the run or a check fails.
const FAILED: u8 = 1;
/// Exit code for malformed input or I/O errors.
const ERROR: u8 = 2;
/// Exit code when the engine aborts a run early.
const ABORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "wrdescent", version, about = "Run, certify and sweep without-replacement incremental descent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run and write its trace and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Overrides `problem.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// `full` or `epoch_only`.
        #[arg(long)]
        record_level: Option<String>,
        /// Override any key, e.g. `--set strategy.alpha=0.3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run named checks on a trace file.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        checks: Vec<String>,
        /// Report directory; defaults to the trace's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a parameter grid and aggregate.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,..`; repeat for a cartesian product.
        #[arg(long, required = true)]
        axis: Vec<Axis>,
        /// Defaults to the template's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summary, gamma and criticality files for a trace.
    Report {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn trace_dir(trace: &Path) -> PathBuf {
    trace.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn cmd_run(
    config: &Path,
    epochs: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    record_level: Option<String>,
    set: &[String],
) -> Result<u8> {
    let mut doc = read_value(config)?;
    if let Some(e) = epochs {
        set_key(&mut doc, "epochs", json!(e))?;
    }
    if let Some(s) = seed {
        set_key(&mut doc, "problem.seed", json!(s))?;
    }
    if let Some(d) = output_dir {
        set_key(&mut doc, "output_dir", json!(d))?;
    }
    if let Some(r) = record_level {
        set_key(&mut doc, "record_level", Value::String(r))?;
    }
    for s in set {
        let (key, value) = parse_assignment(s)?;
        set_key(&mut doc, &key, value)?;
    }
    let config = ExperimentConfig::from_value(doc)?;
    checks::validate_names(&config.checks)?;
    let trace = experiment::execute(&config)?;
    experiment::write_outputs(&config, &trace, &config.output_dir)?;
    println!("wrote {} epochs to {}", trace.completed_epochs(), config.output_dir.display());
    let mut code = 0;
    if !config.checks.is_empty() {
        let (outcomes, artifacts) = checks::run_checks(&trace, &config.checks)?;
        checks::write_report(&config.output_dir, &outcomes, &artifacts)?;
        checks::print_outcomes(&outcomes);
        if !checks::all_passed(&outcomes) {
            code = FAILED;
        }
    }
    if let Some(a) = &trace.abort {
        eprintln!("run aborted at epoch {}, step {}: {}", a.epoch, a.step, a.reason);
        code = ABORTED;
    }
    Ok(code)
}

fn cmd_verify(trace: &Path, names: &[String], out: Option<PathBuf>) -> Result<u8> {
    checks::validate_names(names)?;
    let t = read_trace_file(trace).with_context(|| format!("reading trace {}", trace.display()))?;
    let (outcomes, artifacts) = checks::run_checks(&t, names)?;
    let dir = out.unwrap_or_else(|| trace_dir(trace));
    checks::write_report(&dir, &outcomes, &artifacts)?;
    checks::print_outcomes(&outcomes);
    Ok(if checks::all_passed(&outcomes) { 0 } else { FAILED })
}

fn cmd_sweep(config: &Path, axes: &[Axis], out: Option<PathBuf>) -> Result<u8> {
    let template = read_value(config)?;
    let dir = out.unwrap_or_else(|| {
        template.get("output_dir").and_then(Value::as_str).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
    });
    let cells = sweep::run_sweep(&template, axes)?;
    sweep::write_sweep(&dir, axes, &cells)?;
    let failed = cells.iter().filter(|c| c.status != "ok").count();
    println!("{} cells, {} not ok, written to {}", cells.len(), failed, dir.display());
    Ok(0)
}

fn cmd_report(trace: &Path, out: Option<PathBuf>) -> Result<u8> {
    let t = read_trace_file(trace).with_context(|| format!("reading trace {}", trace.display()))?;
    let dir = out.unwrap_or_else(|| trace_dir(trace));
    let doc = report::build_report(&t, &dir)?;
    report::print_summary(&doc);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, epochs, seed, output_dir, record_level, set } => {
            cmd_run(&config, epochs, seed, output_dir, record_level, &set)
        }
        Command::Verify { trace, checks, out } => cmd_verify(&trace, &checks, out),
        Command::Sweep { config, axis, out } => cmd_sweep(&config, &axis, out),
        Command::Report { trace, out } => cmd_report(&trace, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ERROR)
        }
    }
}

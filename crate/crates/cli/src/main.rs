//! `wfreg`: run, enumerate, and check register constructions.
//!
//! Exit codes: 0 pass, 1 semantic failure, 2 input error, 3 truncated.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use wfreg::check::{check_level, classify};
use wfreg::scenario::{run_enumeration, CheckTarget, Mode, ScenarioConfig};
use wfreg::sim::{extract_history, random_execution, Scope};
use wfreg::timestamp::check_cts;
use wfreg::trace::{parse_trace_full, serialize_trace, serialize_trace_with_decisions};

const PASS: u8 = 0;
const FAIL: u8 = 1;
const INPUT_ERROR: u8 = 2;
const TRUNCATED: u8 = 3;

#[derive(Parser)]
#[command(name = "wfreg", version, about = "Simulate and verify wait-free register constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded random execution and write its traces.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Enumerate every execution and check each one.
    Enumerate {
        #[arg(long)]
        config: PathBuf,
        /// safe, regular, atomic, or cts.
        #[arg(long, default_value = "atomic")]
        check: CheckTarget,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        max_executions: Option<u64>,
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Check a trace file.
    Check {
        trace: PathBuf,
        /// safe, regular, atomic, cts, or classify.
        #[arg(long, default_value = "atomic")]
        level: String,
    },
}

/// An error with the exit code it maps to.
struct Failure(u8, anyhow::Error);

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure(INPUT_ERROR, e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out),
        Command::Enumerate {
            config,
            check,
            out,
            max_executions,
            max_steps,
        } => enumerate(&config, check, &out, max_executions, max_steps),
        Command::Check { trace, level } => check(&trace, &level),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(input)?;
    let cfg = ScenarioConfig::from_json(&text)
        .with_context(|| format!("in {}", path.display()))
        .map_err(input)?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(input)?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(input)?;
    Ok(path)
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let spec = cfg.protocol().map_err(input)?;
    let e = random_execution(&spec, &cfg.workload, seed).map_err(input)?;
    let high = extract_history(&e, Scope::HighLevel);
    let trace = write(out, "trace.jsonl", &serialize_trace_with_decisions(&high, &e.decisions))?;
    write(out, "base_trace.jsonl", &serialize_trace(&extract_history(&e, Scope::BaseLevel)))?;
    println!(
        "{} seed {seed}: {} operations, {} events, {} decisions -> {}",
        spec.name,
        high.len(),
        e.events.len(),
        e.decisions.len(),
        trace.display()
    );
    Ok(PASS)
}

fn enumerate(
    config: &Path,
    check: CheckTarget,
    out: &Path,
    max_executions: Option<u64>,
    max_steps: Option<u64>,
) -> Result<u8, Failure> {
    let cfg = load_config(config)?;
    if cfg.mode != Mode::Enumerate {
        return Err(input(anyhow!("{} is a random-mode scenario; use simulate", config.display())));
    }
    let mut limits = cfg.limits;
    limits.max_executions = max_executions.unwrap_or(limits.max_executions);
    limits.max_steps = max_steps.unwrap_or(limits.max_steps);
    let mut outcome = run_enumeration(&cfg, check, limits).map_err(input)?;
    if let (Some(c), Some(trace)) = (&mut outcome.report.counterexample, &outcome.counterexample_trace) {
        let path = write(out, "counterexample.jsonl", trace)?;
        c.path = Some(path.display().to_string());
    }
    let report = &outcome.report;
    let json = serde_json::to_string_pretty(report).map_err(input)?;
    let path = write(out, "report.json", &(json + "\n"))?;
    println!("{} -> {}", report.summary(), path.display());
    if let Some(c) = &report.counterexample {
        println!("first failure ({}): {}", c.check, c.explanation);
    }
    Ok(if report.failed() {
        FAIL
    } else if report.truncated {
        TRUNCATED
    } else {
        PASS
    })
}

fn check(trace: &Path, level: &str) -> Result<u8, Failure> {
    let text = fs::read_to_string(trace)
        .with_context(|| format!("reading {}", trace.display()))
        .map_err(input)?;
    let h = parse_trace_full(&text)
        .with_context(|| format!("in {}", trace.display()))
        .map_err(input)?
        .history;
    if level == "classify" {
        let best = classify(&h).map_err(input)?;
        return Ok(match best {
            Some(level) => {
                println!("{level}");
                PASS
            }
            None => {
                println!("none");
                FAIL
            }
        });
    }
    let target: CheckTarget = level.parse().map_err(|e: String| input(anyhow!(e)))?;
    let verdict = match target.level() {
        Some(l) => check_level(&h, l).map_err(input)?,
        None => check_cts(&h).map_err(input)?,
    };
    println!("{target}: {verdict}");
    Ok(if verdict.pass { PASS } else { FAIL })
}

//! `repulse`: runs declarative experiments against the numerical core and
//! reports pass/fail per check.

mod config;
mod experiments;
mod report;
mod suite;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use report::{inputs_digest, Summary};

#[derive(Parser)]
#[command(name = "repulse", version, about = "Experiment runner for repulsive Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized sampling (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print the final status line.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run every experiment listed in a manifest.
    Suite { manifest: PathBuf },
}

pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
}

pub struct Outcome {
    pub summary: Summary,
    pub out: PathBuf,
}

/// Parses, runs and writes `summary.json` into `opts.out`.
pub fn run_config(path: &Path, opts: &RunOptions) -> Result<Outcome> {
    let (cfg, text) = ExperimentConfig::from_path(path)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let mut summary = Summary::new(cfg.experiment.name(), inputs_digest(&text, seed));
    experiments::run(&cfg, seed, &opts.out, &mut summary).with_context(|| format!("experiment `{}`", cfg.label()))?;
    summary.write(&opts.out.join("summary.json"))?;
    Ok(Outcome { summary, out: opts.out.clone() })
}

fn run_one(path: &Path, cli: &Cli) -> Result<bool> {
    let out = match &cli.out {
        Some(o) => o.clone(),
        None => {
            let (cfg, _) = ExperimentConfig::from_path(path)?;
            cfg.output.dir.clone().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out").join(cfg.label()))
        }
    };
    let o = run_config(path, &RunOptions { out, seed: cli.seed })?;
    if !cli.quiet {
        for c in &o.summary.checks {
            println!(
                "{} {}: measured {:e}, expected {:e}, tol {:e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.expected,
                c.tol
            );
        }
    }
    let ok = o.summary.passed();
    println!("{}: {} ({})", o.summary.experiment, if ok { "pass" } else { "fail" }, o.out.join("summary.json").display());
    Ok(ok)
}

fn run_suite(path: &Path, cli: &Cli) -> Result<bool> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let report = suite::run(path, &RunOptions { out: out.clone(), seed: cli.seed })?;
    if !cli.quiet {
        for r in &report.experiments {
            let crit = r.criterion.as_deref().map(|c| format!("[{c}] ")).unwrap_or_default();
            match &r.error {
                Some(e) => println!("ERROR {crit}{}: {e}", r.id),
                None => println!("{} {crit}{}: {}/{} checks", r.status.to_uppercase(), r.id, r.checks_passed, r.checks_total),
            }
        }
    }
    println!(
        "suite: {} passed, {} failed, {} errors ({})",
        report.passed,
        report.failed,
        report.errors,
        out.join("suite_report.json").display()
    );
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run_one(config, &cli),
        Command::Suite { manifest } => run_suite(manifest, &cli),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

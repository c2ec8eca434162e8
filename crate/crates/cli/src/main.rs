//! Command-line experiment runner.

use clap::Parser;
use dirlim_cli::config::{parse_config, ExperimentConfig};
use dirlim_cli::experiments::{run, RunEnv};
use dirlim_cli::fixtures;
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments on limit sets and growth indicators of
/// self-joined Schottky groups.
#[derive(Parser, Debug)]
#[command(name = "dirlim", version, about)]
struct Args {
    /// Configuration file (TOML).
    #[arg(long, conflicts_with = "fixture")]
    config: Option<PathBuf>,

    /// Built-in fixture name (F1..F5).
    #[arg(long)]
    fixture: Option<String>,

    /// List built-in fixtures and exit.
    #[arg(long)]
    list_fixtures: bool,

    /// Experiment name, overriding the configuration.
    #[arg(long)]
    experiment: Option<String>,

    /// Orbit depth, overriding the configuration.
    #[arg(long)]
    max_word_length: Option<usize>,

    /// Worker threads for enumeration (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Seed for the randomized geometry checks.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for report.json and tables/.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Orbit cache file; reused when the config hash matches, refused when
    /// stale.
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn load_config(args: &Args) -> anyhow::Result<(ExperimentConfig, Vec<String>)> {
    if let Some(name) = &args.fixture {
        let config = fixtures::fixture(name)
            .ok_or_else(|| anyhow::anyhow!("unknown fixture {name:?}; try --list-fixtures"))?;
        return Ok((config, Vec::new()));
    }
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("one of --config or --fixture is required"))?;
    Ok(parse_config(path)?)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_fixtures {
        for name in fixtures::FIXTURES {
            let config = fixtures::fixture(name).expect("built-in fixture");
            println!(
                "{name}: k = {}, generators = {}, depth = {}",
                config.joining.factors.len(),
                config.joining.generators,
                config.run.max_word_length
            );
        }
        return ExitCode::SUCCESS;
    }

    let (mut config, warnings) = match load_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if let Some(name) = &args.experiment {
        config.experiment.name = name.clone();
    }
    if let Some(depth) = args.max_word_length {
        config.run.max_word_length = depth;
    }
    if let Some(workers) = args.workers {
        config.run.workers = workers;
    }
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Err(e) = dirlim_cli::config::validate(&mut config) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }

    let env = RunEnv { out_dir: Some(args.out_dir.clone()), cache: args.cache.clone() };
    match run(&config, &env) {
        Ok(report) => {
            for line in report.summary_lines() {
                println!("{line}");
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {} (report written to {})",
                report.experiment,
                if report.pass { "PASS" } else { "FAIL" },
                args.out_dir.join("report.json").display()
            );
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

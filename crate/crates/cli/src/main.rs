//! `divlab`: run an experiment from a TOML config and write tidy tables plus
//! a manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use divlab::config::{Experiment, ExperimentConfig, OutputFormat};
use divlab::experiments;
use divlab::rng::with_threads;
use divlab::LabError;

#[derive(Parser)]
#[command(name = "divlab", version, about = "Divisors in intervals over restricted prime sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// H_Q(x, y, 2y) against the predictor across prime sets
    HqScan(Common),
    /// A_Q(N)/|S_Q(N)|² trend on both sides of δ = 1/log 4
    AqDichotomy(Common),
    /// Regime sweep of the Poisson-type sum and the δ phase curve
    PoissonPhase(Common),
    /// Order-statistic barrier estimates
    Smirnov(Common),
    /// Run the verification suite; exits 1 on any failure
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Optional for `verify`.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory [default: out/<experiment>]
    #[arg(long, env = "DIVLAB_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this)
    #[arg(long, env = "DIVLAB_THREADS")]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Criteria to run: ids, keys or groups, comma separated
    #[arg(long)]
    filter: Option<String>,
    /// Replacement fixture file for the verification suite
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Print the run summary as JSON on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn build_config(experiment: Experiment, args: &Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if experiment == Experiment::Verify => ExperimentConfig::new(Experiment::Verify),
        None => {
            return Err(LabError::Config(format!(
                "{} needs --config (see the configs/ directory)",
                experiment.name()
            )))
        }
    };
    if cfg.experiment != experiment {
        return Err(LabError::Config(format!(
            "config is for `{}`, not `{}`",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if args.filter.is_some() {
        cfg.filter = args.filter.clone();
    }
    if args.fixtures.is_some() {
        cfg.fixtures = args.fixtures.clone();
    }
    if let Some(out) = &args.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::HqScan(a) => (Experiment::HqScan, a),
        Command::AqDichotomy(a) => (Experiment::AqDichotomy, a),
        Command::PoissonPhase(a) => (Experiment::PoissonPhase, a),
        Command::Smirnov(a) => (Experiment::Smirnov, a),
        Command::Verify(a) => (Experiment::Verify, a),
    };
    let cfg = match build_config(experiment, args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));

    let result = with_threads(cfg.threads, || experiments::run(&cfg));
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match experiments::write(&report, &cfg, &out_dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: writing {}: {e}", out_dir.display());
            return ExitCode::from(2);
        }
    };

    if let Some(lines) = report.summary.get("lines").and_then(|l| l.as_array()) {
        for l in lines {
            println!("{}", l.as_str().unwrap_or_default());
        }
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    if args.json {
        println!("{}", serde_json::to_string(&report.summary).expect("summary serializes"));
    }
    match report.passed {
        Some(false) => {
            let failed: Vec<&str> = report.summary["failed"]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_str()).collect())
                .unwrap_or_default();
            eprintln!("verification failed: {}", failed.join(", "));
            ExitCode::from(1)
        }
        _ => ExitCode::SUCCESS,
    }
}

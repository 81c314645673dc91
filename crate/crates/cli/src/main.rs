//! `rbrs`: batch experiments for robust rate-splitting beamforming.
//!
//! Exit codes: 0 on success, 1 on a config or I/O error, 2 when some
//! realizations failed (the remaining results are still written).

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Experiment, ExperimentConfig};
use run::Plan;

/// Worker-count variable; defaults to the number of CPUs.
const WORKERS_ENV: &str = "RBRS_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "rbrs", version, about = "Robust rate-splitting beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-iteration objective traces over a grid of radii.
    Convergence(RunArgs),
    /// Feasible-realization counts over a grid of squared radii.
    Robustness(RunArgs),
    /// Min rate and common-rate sum over a grid of blocklengths.
    SweepBlocklength(RunArgs),
    /// Min rate and common-rate sum over a grid of block error rates.
    SweepBler(RunArgs),
    /// Min rate over a grid of power budgets with radii d P^-alpha.
    SweepSnr(RunArgs),
    /// One scheme on one channel set.
    SingleSolve(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `n_realizations`.
    #[arg(long)]
    realizations: Option<usize>,
    /// Record wall-clock solve times (output is then not reproducible).
    #[arg(long)]
    timings: bool,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Convergence(a) => (Experiment::Convergence, a),
            Command::Robustness(a) => (Experiment::Robustness, a),
            Command::SweepBlocklength(a) => (Experiment::SweepBlocklength, a),
            Command::SweepBler(a) => (Experiment::SweepBler, a),
            Command::SweepSnr(a) => (Experiment::SweepSnr, a),
            Command::SingleSolve(a) => (Experiment::SingleSolve, a),
        }
    }
}

fn workers() -> Result<Option<usize>, String> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (experiment, args) = Cli::parse().command.split();

    let mut cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error in {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.realizations {
        cfg.n_realizations = n;
    }
    let system = match cfg.validate(experiment) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error in {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let out_dir = args
        .out
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("rbrs-out").join(experiment.name()));
    let base_dir = args.config.parent().map(PathBuf::from).unwrap_or_default();

    let pool = match workers() {
        Ok(n) => {
            let mut b = rayon::ThreadPoolBuilder::new();
            if let Some(n) = n {
                b = b.num_threads(n);
            }
            b.build().expect("thread pool")
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };

    let plan = Plan::new(experiment, cfg, &system);
    let outcomes = pool.install(|| plan.run(&base_dir));
    let summary = run::summarize(&plan, &outcomes);
    if let Err(e) = output::write_all(&out_dir, &plan, &outcomes, &summary, args.timings) {
        eprintln!("cannot write results to {}: {e}", out_dir.display());
        return ExitCode::from(1);
    }
    eprintln!(
        "{experiment}: {} runs, {} failed, results in {}",
        outcomes.len(),
        summary.failed_runs,
        out_dir.display()
    );
    if summary.failed_runs > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

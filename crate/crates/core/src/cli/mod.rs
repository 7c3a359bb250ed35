//! Experiment runner: config parsing, dispatch, report emission.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{ExperimentConfig, ExperimentName};
pub use experiments::run_experiment;
pub use report::{emit_report, emit_summary, CriterionResult, ExperimentReport, RunSummary};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "THREADS";

#[derive(Debug, Parser)]
#[command(name = "scatwave", version, about = "Run the validation experiments and write CSV/JSON reports")]
pub struct Args {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's experiment.
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentName>,
    /// Output directory for reports.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; affects wall time only.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Reduced sweeps for CI.
    #[arg(long)]
    pub quick: bool,
}

/// Wall-clock data, kept apart from the deterministic reports.
#[derive(Serialize)]
struct Runtime {
    threads: usize,
    seconds: Vec<(&'static str, f64)>,
}

fn thread_count(args: &Args) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(args.threads),
    }
}

pub fn load_config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = args.experiment {
        cfg.experiment = e;
    }
    if args.quick {
        cfg = cfg.quick();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every requested experiment, writes reports and the summary under
/// `args.out`, and returns the criteria in report order.
pub fn execute(args: &Args) -> Result<RunSummary> {
    let cfg = load_config(args)?;
    execute_config(&cfg, &args.out, thread_count(args)?, args.quick)
}

/// [`execute`] for an already validated config; `threads = None` uses the
/// default pool size.
pub fn execute_config(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>, quick: bool) -> Result<RunSummary> {
    cfg.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?
    };
    let mut criteria = Vec::new();
    let mut seconds = Vec::new();
    let names = cfg.experiment.expand();
    for &name in &names {
        let start = Instant::now();
        let reports = pool.install(|| run_experiment(cfg, name))?;
        seconds.push((name.as_str(), start.elapsed().as_secs_f64()));
        for r in &reports {
            for c in &r.criteria {
                println!("{}", c.line());
            }
            emit_report(r, out)?;
            criteria.extend(r.criteria.iter().cloned());
        }
    }
    let summary = RunSummary {
        schema_version: config::SCHEMA_VERSION,
        quick,
        experiments: names.iter().map(|n| n.as_str()).collect(),
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    };
    emit_summary(&summary, out)?;
    let runtime = Runtime { threads: pool.current_num_threads(), seconds };
    std::fs::write(out.join("runtime.json"), report::to_json(&runtime)?)?;
    std::fs::write(out.join("config.json"), cfg.to_json())?;
    Ok(summary)
}

/// Exit code: 0 all-pass, 1 criterion failure, 2 configuration, 3 numerical.
pub fn run(args: &Args) -> i32 {
    match execute(args) {
        Ok(summary) if summary.pass => 0,
        Ok(_) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Thin command-line front end over the library harness.
//!
//! Exit codes: 0 success, 2 config error, 3 missing threshold cache,
//! 4 runtime numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftwatch::error::Error;
use driftwatch::eval::LossParams;
use driftwatch::harness::{
    cmd_calibrate, cmd_ingest_check, cmd_losscurve, cmd_peek, cmd_run, resolve_cache_dir,
    RunConfig,
};
use driftwatch::scenario::{DriftScenario, ScenarioKind};

#[derive(Parser)]
#[command(
    name = "driftwatch",
    about = "Sequential drift detection on model-confidence streams",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Evaluate and scan at every observation (sets both strides to 1).
    #[arg(long)]
    faithful: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate threshold tables into the cache directory.
    Calibrate(ConfigArgs),
    /// Run every (scenario, detector) pair and write reports + plot data.
    Run(ConfigArgs),
    /// Simulate repeated-testing false-alarm inflation, one CSV row per alpha.
    Peek {
        /// Significance levels to simulate.
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.01, 0.005, 0.001])]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        start: usize,
        #[arg(long, default_value_t = 10_000)]
        sims: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_name = "N")]
        jobs: Option<usize>,
    },
    /// Emit loss against detection batch for one scenario.
    Losscurve {
        /// Named scenario or path to a scenario JSON file.
        scenario: String,
        #[arg(long, default_value_t = 20)]
        batch_size: usize,
        #[arg(long, default_value_t = -1000.0, allow_hyphen_values = true)]
        l0: f64,
        #[arg(long, default_value_t = -250.0, allow_hyphen_values = true)]
        l1: f64,
    },
    /// Validate a pool CSV (`z,label,pool`).
    IngestCheck {
        /// Pool file to check.
        path: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::MissingCache { .. } => 3,
        _ => 4,
    }
}

fn configure_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.faithful {
        config.set_faithful();
    }
    config.validate()?;
    Ok(config)
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Calibrate(args) => {
            configure_jobs(args.jobs);
            let config = load_config(&args)?;
            let cache_dir = resolve_cache_dir(&config, None);
            let written = cmd_calibrate(&config, &cache_dir)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Run(args) => {
            configure_jobs(args.jobs);
            let config = load_config(&args)?;
            let cache_dir = resolve_cache_dir(&config, None);
            let out_dir = args
                .out
                .or_else(|| config.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("driftwatch-out"));
            let artifacts = cmd_run(&config, &cache_dir, &out_dir)?;
            println!("{}", artifacts.dir.display());
            for report in &artifacts.experiments {
                let r = &report.report;
                println!(
                    "{} / {}: false_alarm={:.3} missed={:.3} detections={}",
                    r.scenario,
                    r.detector,
                    r.false_alarm_prob,
                    r.missed_prob,
                    r.delays.len()
                );
            }
            Ok(())
        }
        Command::Peek {
            alphas,
            n,
            start,
            sims,
            seed,
            jobs,
        } => {
            configure_jobs(jobs);
            cmd_peek(&alphas, n, start, sims, seed, std::io::stdout().lock())?;
            Ok(())
        }
        Command::Losscurve {
            scenario,
            batch_size,
            l0,
            l1,
        } => {
            let params = LossParams::new(l0, l1)?;
            let scenario = match ScenarioKind::from_name(&scenario) {
                Some(kind) => DriftScenario::standard(kind),
                None if scenario.ends_with(".json") => DriftScenario::from_json_path(&scenario)?,
                None => {
                    return Err(Error::Config(format!(
                        "unknown scenario `{}`; expected one of {:?} or a .json path",
                        scenario,
                        ScenarioKind::ALL.map(|k| k.name())
                    )))
                }
            };
            cmd_losscurve(&scenario, batch_size, &params, std::io::stdout().lock())?;
            Ok(())
        }
        Command::IngestCheck { path } => {
            let summary = cmd_ingest_check(&path)?;
            println!(
                "ok: {} base entries, {} drift entries",
                summary.base_count, summary.drift_count
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(exit_code_for(&err))
        }
    }
}

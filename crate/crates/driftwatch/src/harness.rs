//! Configuration and command implementations behind the `driftwatch` binary.
//!
//! A run is described by one JSON config (plus flag overrides). The master
//! seed fans out through counter-based derivation — `(seed, stream id,
//! repetition)` — so any single repetition is reproducible in isolation
//! and reruns with the same config are bit-identical. Threshold tables are
//! cached as JSON keyed by every calibration input; report and plot-data
//! files land in a subdirectory of the output directory named by the
//! config hash, so differing configs never overwrite each other.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{loss, peeking_simulation, LossParams, PeekingSummary};
use crate::experiment::{run_experiment, DetectorSpec, Experiment, GateParams};
use crate::local_test::DEFAULT_MAX_OUTLIERS;
use crate::moments::{MomentSource, MonteCarloMoments};
use crate::scenario::{
    read_pools, BetaParams, ConfidenceSource, DriftScenario, ScenarioKind,
};
use crate::seed::derive_seed;
use crate::stats::{StatisticKind, TwoSampleStatistic};
use crate::stream::DEFAULT_BATCH_SIZE;
use crate::threshold::{calibrate_thresholds, AlphaMode, CalibrationConfig, ThresholdTable, DEFAULT_WARMUP};

/// Environment variable overriding the threshold-cache directory.
pub const CACHE_ENV_VAR: &str = "DRIFTWATCH_CACHE";

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}
fn default_change_batch() -> usize {
    crate::scenario::DEFAULT_CHANGE_BATCH
}
fn default_total_batches() -> usize {
    crate::scenario::DEFAULT_TOTAL_BATCHES
}
fn default_repetitions() -> usize {
    50
}
fn default_calibration_streams() -> usize {
    2_000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_t0() -> usize {
    DEFAULT_WARMUP
}
fn default_alpha_mode() -> AlphaMode {
    AlphaMode::HorizonTotal
}
fn default_max_outliers() -> usize {
    DEFAULT_MAX_OUTLIERS
}

/// Confidence source description in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    BetaSynthetic { base: (f64, f64), drift: (f64, f64) },
    PoolCsv { path: PathBuf },
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::BetaSynthetic {
            base: (8.0, 2.0),
            drift: (2.0, 2.0),
        }
    }
}

/// One detector entry in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorConfig {
    Cpm {
        id: String,
        statistic: StatisticKind,
        #[serde(default = "default_alpha_mode")]
        alpha_mode: AlphaMode,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_t0")]
        t0: usize,
        /// Defaults to the batch size (evaluate at batch boundaries).
        #[serde(default)]
        evaluation_stride: Option<usize>,
        /// Defaults to the batch size.
        #[serde(default)]
        candidate_stride: Option<usize>,
        #[serde(default)]
        outlier_gated: bool,
        #[serde(default = "default_alpha")]
        alpha_star: f64,
        #[serde(default = "default_max_outliers")]
        max_outliers: usize,
    },
    NaivePairwise {
        id: String,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    NaiveSplits {
        id: String,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

impl DetectorConfig {
    pub fn id(&self) -> &str {
        match self {
            DetectorConfig::Cpm { id, .. }
            | DetectorConfig::NaivePairwise { id, .. }
            | DetectorConfig::NaiveSplits { id, .. } => id,
        }
    }
}

/// The run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Master seed; required so no run ever seeds from the wall clock.
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_change_batch")]
    pub change_batch: usize,
    #[serde(default = "default_total_batches")]
    pub total_batches: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_calibration_streams")]
    pub calibration_streams: usize,
    /// Named scenarios, or paths to custom scenario JSON files.
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub loss: Option<LossParams>,
    pub detectors: Vec<DetectorConfig>,
    /// Threshold-cache directory; `DRIFTWATCH_CACHE` overrides it.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Output directory for reports and plot data.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("bad config: {}", e)))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::config(format!(
                "cannot read config {}: {}",
                path.as_ref().display(),
                e
            ))
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.change_batch == 0 || self.change_batch >= self.total_batches {
            return Err(Error::config(format!(
                "change_batch {} must lie in 1..total_batches {}",
                self.change_batch, self.total_batches
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be >= 1"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::config("at least one scenario is required"));
        }
        if self.detectors.is_empty() {
            return Err(Error::config("at least one detector is required"));
        }
        let mut seen = HashSet::new();
        for d in &self.detectors {
            if d.id().is_empty() {
                return Err(Error::config("detector id must be nonempty"));
            }
            if !seen.insert(d.id().to_string()) {
                return Err(Error::config(format!("duplicate detector id `{}`", d.id())));
            }
            if let DetectorConfig::Cpm {
                alpha,
                alpha_star,
                t0,
                ..
            } = d
            {
                if !(*alpha > 0.0 && *alpha < 1.0) || !(*alpha_star > 0.0 && *alpha_star < 1.0) {
                    return Err(Error::config("alpha and alpha_star must lie in (0, 1)"));
                }
                if *t0 >= self.horizon() {
                    return Err(Error::config(format!(
                        "t0 {} must be below the horizon {}",
                        t0,
                        self.horizon()
                    )));
                }
            }
        }
        for name in &self.scenarios {
            if ScenarioKind::from_name(name).is_none() && !name.ends_with(".json") {
                return Err(Error::config(format!(
                    "unknown scenario `{}` (not a named scenario or a .json path)",
                    name
                )));
            }
        }
        if let Some(params) = &self.loss {
            params.validate().map_err(|e| Error::config(e.to_string()))?;
        }
        Ok(())
    }

    /// Maximum stream length of this configuration.
    pub fn horizon(&self) -> usize {
        self.total_batches * self.batch_size
    }

    pub fn loss_params(&self) -> LossParams {
        self.loss.unwrap_or_default()
    }

    /// Force both strides to 1 on every CPM detector (the `--faithful` flag).
    pub fn set_faithful(&mut self) {
        for d in &mut self.detectors {
            if let DetectorConfig::Cpm {
                evaluation_stride,
                candidate_stride,
                ..
            } = d
            {
                *evaluation_stride = Some(1);
                *candidate_stride = Some(1);
            }
        }
    }

    /// Short content hash identifying this configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(b"driftwatch-run-v1\n");
        hasher.update(canonical.as_bytes());
        hex::encode(&hasher.finalize()[..6])
    }

    pub fn resolve_scenarios(&self) -> Result<Vec<DriftScenario>> {
        self.scenarios
            .iter()
            .map(|name| match ScenarioKind::from_name(name) {
                Some(kind) => Ok(DriftScenario::named(
                    kind,
                    self.change_batch,
                    self.total_batches,
                )),
                None => DriftScenario::from_json_path(name),
            })
            .collect()
    }

    pub fn resolve_source(&self) -> Result<ConfidenceSource> {
        match &self.source {
            SourceConfig::BetaSynthetic { base, drift } => Ok(ConfidenceSource::beta(
                BetaParams::new(base.0, base.1)?,
                BetaParams::new(drift.0, drift.1)?,
            )),
            SourceConfig::PoolCsv { path } => ConfidenceSource::from_pool_csv_path(path),
        }
    }

    /// Calibration inputs of one CPM detector entry.
    pub fn calibration_for(&self, detector: &DetectorConfig) -> Option<CalibrationConfig> {
        match detector {
            DetectorConfig::Cpm {
                statistic,
                alpha_mode,
                alpha,
                t0,
                evaluation_stride,
                candidate_stride,
                ..
            } => Some(CalibrationConfig {
                statistic_kind: *statistic,
                alpha_mode: *alpha_mode,
                alpha: *alpha,
                t0: *t0,
                horizon: self.horizon(),
                evaluation_stride: evaluation_stride.unwrap_or(self.batch_size),
                candidate_stride: candidate_stride.unwrap_or(self.batch_size),
                num_streams: self.calibration_streams,
                // Shared across detectors so identical calibration inputs
                // share one cache file.
                seed: derive_seed(self.seed, &[5]),
            }),
            _ => None,
        }
    }
}

/// Resolve the cache directory: environment override, then config, then
/// a local default.
pub fn resolve_cache_dir(config: &RunConfig, flag: Option<&Path>) -> PathBuf {
    if let Ok(dir) = std::env::var(CACHE_ENV_VAR) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    config
        .cache_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("driftwatch-cache"))
}

/// Deterministic cache filename from every calibration input.
pub fn cache_file_name(c: &CalibrationConfig) -> String {
    format!(
        "{}_{}_a{}_t{}_h{}_e{}_c{}_n{}_s{}.json",
        c.statistic_kind.name(),
        c.alpha_mode.name(),
        c.alpha,
        c.t0,
        c.horizon,
        c.evaluation_stride,
        c.candidate_stride,
        c.num_streams,
        c.seed
    )
}

/// Moment provider paired with a threshold table (same normalization as
/// calibration: seed derived from the table seed, grid from its strides).
pub fn moments_for_table(table: &ThresholdTable) -> MonteCarloMoments {
    MonteCarloMoments::new(table.moment_seed()).with_grid(2, table.candidate_stride)
}

/// Calibrate (or reuse) the threshold cache of every CPM detector.
/// Returns the cache file paths, one per distinct calibration.
pub fn cmd_calibrate(config: &RunConfig, cache_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(cache_dir)?;
    let mut written = Vec::new();
    let mut seen = HashSet::new();
    for detector in &config.detectors {
        let Some(calibration) = config.calibration_for(detector) else {
            continue;
        };
        calibration.validate()?;
        let path = cache_dir.join(cache_file_name(&calibration));
        if !seen.insert(path.clone()) {
            continue;
        }
        if path.exists() {
            // Reuse after validating; calibration is keyed by all inputs.
            ThresholdTable::load_json(&path)?;
        } else {
            let moments = MonteCarloMoments::new(derive_seed(calibration.seed, &[0x4d4f4d, 0x53]))
                .with_grid(2, calibration.candidate_stride);
            let table = calibrate_thresholds(&calibration, &moments)?;
            table.save_json(&path)?;
        }
        written.push(path);
    }
    Ok(written)
}

/// A loaded, runnable detector with its id.
pub struct ResolvedDetector {
    pub id: String,
    pub spec: DetectorSpec,
}

/// Load every detector, fetching CPM threshold tables from the cache.
pub fn resolve_detectors(config: &RunConfig, cache_dir: &Path) -> Result<Vec<ResolvedDetector>> {
    config
        .detectors
        .iter()
        .map(|detector| {
            let spec = match detector {
                DetectorConfig::Cpm {
                    statistic,
                    outlier_gated,
                    alpha_star,
                    max_outliers,
                    ..
                } => {
                    let calibration = config
                        .calibration_for(detector)
                        .expect("cpm detector has calibration inputs");
                    let path = cache_dir.join(cache_file_name(&calibration));
                    let table = Arc::new(ThresholdTable::load_json(&path)?);
                    let moments: Arc<dyn MomentSource> = Arc::new(moments_for_table(&table));
                    DetectorSpec::Cpm {
                        statistic: TwoSampleStatistic::new(*statistic),
                        table,
                        moments,
                        gate: outlier_gated.then_some(GateParams {
                            alpha_star: *alpha_star,
                            n_grid: crate::local_test::DEFAULT_GRID_POINTS,
                            max_outliers: *max_outliers,
                        }),
                    }
                }
                DetectorConfig::NaivePairwise { alpha, .. } => {
                    DetectorSpec::NaivePairwise { alpha: *alpha }
                }
                DetectorConfig::NaiveSplits { alpha, .. } => {
                    DetectorSpec::NaiveSplits { alpha: *alpha }
                }
            };
            Ok(ResolvedDetector {
                id: detector.id().to_string(),
                spec,
            })
        })
        .collect()
}

/// Everything `cmd_run` wrote.
pub struct RunArtifacts {
    /// The versioned run directory (under the output directory).
    pub dir: PathBuf,
    pub report_paths: Vec<PathBuf>,
    pub experiments: Vec<Experiment>,
}

fn quartile_row(sorted: &[f64]) -> [Option<f64>; 5] {
    if sorted.is_empty() {
        return [None; 5];
    }
    let q = |p: f64| {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        Some(if lo == hi {
            sorted[lo]
        } else {
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        })
    };
    [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)]
}

fn write_quartile_record<W: Write>(
    w: &mut csv::Writer<W>,
    scenario: &str,
    detector: &str,
    label: &str,
    count: usize,
    row: [Option<f64>; 5],
) -> Result<()> {
    let fmt = |v: Option<f64>| v.map(|x| format!("{}", x)).unwrap_or_default();
    w.write_record([
        scenario.to_string(),
        detector.to_string(),
        label.to_string(),
        count.to_string(),
        fmt(row[0]),
        fmt(row[1]),
        fmt(row[2]),
        fmt(row[3]),
        fmt(row[4]),
    ])?;
    Ok(())
}

/// Run every (scenario, detector) pair and emit reports plus plot data.
pub fn cmd_run(config: &RunConfig, cache_dir: &Path, out_dir: &Path) -> Result<RunArtifacts> {
    config.validate()?;
    let scenarios = config.resolve_scenarios()?;
    let source = config.resolve_source()?;
    let detectors = resolve_detectors(config, cache_dir)?;
    let params = config.loss_params();

    let run_dir = out_dir.join(format!("run-{}", config.hash()));
    std::fs::create_dir_all(&run_dir)?;
    std::fs::write(
        run_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;

    let mut experiments = Vec::new();
    let mut report_paths = Vec::new();
    let mut rates = csv::Writer::from_path(run_dir.join("rates.csv"))?;
    rates.write_record(["scenario", "detector", "false_alarm_prob", "missed_prob"])?;
    let mut delays = csv::Writer::from_path(run_dir.join("delays.csv"))?;
    delays.write_record([
        "scenario", "detector", "set", "count", "min", "q1", "median", "q3", "max",
    ])?;
    let mut thetas = csv::Writer::from_path(run_dir.join("theta.csv"))?;
    thetas.write_record([
        "scenario", "detector", "set", "count", "min", "q1", "median", "q3", "max",
    ])?;
    let mut losses = csv::Writer::from_path(run_dir.join("losses.csv"))?;
    losses.write_record([
        "scenario", "detector", "set", "count", "min", "q1", "median", "q3", "max",
    ])?;

    for scenario in &scenarios {
        for detector in &detectors {
            let experiment = run_experiment(
                &detector.id,
                &detector.spec,
                scenario,
                &source,
                config.batch_size,
                config.repetitions,
                config.seed,
                &params,
            )?;
            let report = &experiment.report;

            let report_path =
                run_dir.join(format!("report_{}_{}.json", scenario.name(), detector.id));
            std::fs::write(&report_path, serde_json::to_string_pretty(report)?)?;
            std::fs::write(
                run_dir.join(format!("records_{}_{}.json", scenario.name(), detector.id)),
                serde_json::to_string_pretty(&experiment.records)?,
            )?;

            // One representative outlier report per gated pair: the first
            // repetition that selected outliers, user-facing and scored.
            if let Some(rec) = experiment.records.iter().find(|r| !r.outliers.is_empty()) {
                let stream = crate::scenario::synthesize_stream(
                    scenario,
                    &source,
                    config.batch_size,
                    rec.seed,
                )?;
                let user = crate::local_test::outlier_report(&stream, &rec.outliers)?;
                std::fs::write(
                    run_dir.join(format!("outliers_{}_{}.json", scenario.name(), detector.id)),
                    serde_json::to_string_pretty(&user)?,
                )?;
                let scored = crate::local_test::scored_outlier_report(&stream, &rec.outliers)?;
                std::fs::write(
                    run_dir.join(format!(
                        "outliers_scored_{}_{}.json",
                        scenario.name(),
                        detector.id
                    )),
                    serde_json::to_string_pretty(&scored)?,
                )?;
            }

            rates.write_record([
                scenario.name().to_string(),
                detector.id.clone(),
                format!("{}", report.false_alarm_prob),
                format!("{}", report.missed_prob),
            ])?;
            let delay_sorted: Vec<f64> = report.delays.iter().map(|&d| d as f64).collect();
            write_quartile_record(
                &mut delays,
                scenario.name(),
                &detector.id,
                "true_detections",
                delay_sorted.len(),
                quartile_row(&delay_sorted),
            )?;
            write_quartile_record(
                &mut losses,
                scenario.name(),
                &detector.id,
                "all_runs",
                report.losses.len(),
                quartile_row(&report.losses),
            )?;
            for (label, values) in [
                ("all", &report.theta.all),
                ("gated", &report.theta.gated),
                ("outliers", &report.theta.outliers),
            ] {
                write_quartile_record(
                    &mut thetas,
                    scenario.name(),
                    &detector.id,
                    label,
                    values.len(),
                    quartile_row(values),
                )?;
            }

            report_paths.push(report_path);
            experiments.push(experiment);
        }
    }
    rates.flush()?;
    delays.flush()?;
    thetas.flush()?;
    losses.flush()?;

    Ok(RunArtifacts {
        dir: run_dir,
        report_paths,
        experiments,
    })
}

/// Run the repeated-testing simulation for each alpha and write the
/// `alpha,pr_v_ge_1,e_v` CSV.
pub fn cmd_peek<W: Write>(
    alphas: &[f64],
    n: usize,
    start: usize,
    sims: usize,
    seed: u64,
    writer: W,
) -> Result<Vec<PeekingSummary>> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["alpha", "pr_v_ge_1", "e_v"])?;
    let mut summaries = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let summary = peeking_simulation(alpha, n, start, sims, seed)?;
        w.write_record([
            format!("{}", summary.alpha),
            format!("{}", summary.pr_v_ge_1),
            format!("{}", summary.e_v),
        ])?;
        summaries.push(summary);
    }
    w.flush()?;
    Ok(summaries)
}

/// Loss against detection batch for one scenario: rows for `b_d = 1..=J`
/// (using the final index of each batch) plus the missed-detection row.
pub fn cmd_losscurve<W: Write>(
    scenario: &DriftScenario,
    batch_size: usize,
    params: &LossParams,
    writer: W,
) -> Result<()> {
    params.validate()?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["b_d", "loss"])?;
    let k = Some(scenario.change_batch() * batch_size);
    for b_d in 1..=scenario.total_batches() {
        let d = Some(b_d * batch_size);
        let value = loss(k, d, scenario.schedule(), batch_size, params)?;
        w.write_record([b_d.to_string(), format!("{}", value)])?;
    }
    let missed = loss(k, None, scenario.schedule(), batch_size, params)?;
    w.write_record(["inf".to_string(), format!("{}", missed)])?;
    w.flush()?;
    Ok(())
}

/// Pool-file sanity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoolSummary {
    pub base_count: usize,
    pub drift_count: usize,
}

/// Validate a pool CSV and report its sizes.
pub fn cmd_ingest_check(path: impl AsRef<Path>) -> Result<PoolSummary> {
    let (base, drift) = read_pools(std::fs::File::open(path)?)?;
    if base.is_empty() {
        return Err(Error::invalid("pool CSV contains no base entries"));
    }
    Ok(PoolSummary {
        base_count: base.len(),
        drift_count: drift.len(),
    })
}

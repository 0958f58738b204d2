//! Detector runners, per-repetition records, and aggregation.
//!
//! A detector runs against synthesized streams; the harness records the
//! detection outcome, its loss, the batch delay for true detections, and
//! the drift fractions of the post-change window and of the selected
//! outliers. Repetitions are independent tasks with seeds derived from
//! `(master seed, repetition)`, so two detectors evaluated with the same
//! master seed see the same streams.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{scan_splits, CpmState, DetectionOutcome};
use crate::error::{Error, Result};
use crate::eval::{loss, naive_pairwise, naive_splits, LossParams};
use crate::kde::kde_fit;
use crate::local_test::{
    drift_fraction, extract_regions, local_density_test, select_outliers, OutlierSelection,
    DEFAULT_GRID_POINTS, DEFAULT_MAX_OUTLIERS,
};
use crate::moments::MomentSource;
use crate::scenario::{synthesize_stream, ConfidenceSource, DriftScenario};
use crate::seed::derive_seed;
use crate::stats::TwoSampleStatistic;
use crate::stream::{batch_of, ConfidenceStream};
use crate::threshold::ThresholdTable;

/// Outlier-gate settings for a CPM detector: detection is withheld until
/// the local density test yields at least one selected outlier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub alpha_star: f64,
    pub n_grid: usize,
    pub max_outliers: usize,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            alpha_star: 0.05,
            n_grid: DEFAULT_GRID_POINTS,
            max_outliers: DEFAULT_MAX_OUTLIERS,
        }
    }
}

/// A runnable detector.
#[derive(Clone)]
pub enum DetectorSpec {
    Cpm {
        statistic: TwoSampleStatistic,
        table: Arc<ThresholdTable>,
        moments: Arc<dyn MomentSource>,
        gate: Option<GateParams>,
    },
    NaivePairwise {
        alpha: f64,
    },
    NaiveSplits {
        alpha: f64,
    },
}

/// What one detector did on one stream.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub outcome: DetectionOutcome,
    /// Selected outliers of a gated detection, in selection order.
    pub outliers: Vec<usize>,
}

impl DetectorSpec {
    /// Run this detector on the detector-visible confidence sequence.
    pub fn run(&self, z: &[f64], batch_size: usize) -> Result<RunOutcome> {
        match self {
            DetectorSpec::Cpm {
                statistic,
                table,
                moments,
                gate: None,
            } => {
                let mut state = CpmState::for_confidences(*statistic, table, moments.as_ref());
                let outcome = state.run(z)?;
                Ok(RunOutcome {
                    outcome,
                    outliers: Vec::new(),
                })
            }
            DetectorSpec::Cpm {
                statistic,
                table,
                moments,
                gate: Some(gate),
            } => run_gated_cpm(*statistic, table, moments.as_ref(), *gate, z),
            DetectorSpec::NaivePairwise { alpha } => {
                Ok(naive_outcome(naive_pairwise(z, batch_size, *alpha)?, batch_size))
            }
            DetectorSpec::NaiveSplits { alpha } => {
                Ok(naive_outcome(naive_splits(z, batch_size, *alpha)?, batch_size))
            }
        }
    }

    fn uses_gate(&self) -> bool {
        matches!(self, DetectorSpec::Cpm { gate: Some(_), .. })
    }
}

/// Map a naive batch estimate `B_hat = j* - 1` to observation indices:
/// the detection happens at the end of batch `j*`, the changepoint estimate
/// at the end of batch `B_hat`.
fn naive_outcome(b_hat: Option<usize>, batch_size: usize) -> RunOutcome {
    let outcome = match b_hat {
        None => DetectionOutcome::none(),
        Some(b) => DetectionOutcome {
            d: Some((b + 1) * batch_size),
            k_hat: Some(b * batch_size),
            w_max: None,
        },
    };
    RunOutcome {
        outcome,
        outliers: Vec::new(),
    }
}

/// Outlier gate: fit densities on the estimated pre/post samples and select
/// anomalous post-change indices. A post sample too small or degenerate for
/// a density estimate cannot satisfy the gate yet.
fn gate_selection(
    observed: &[f64],
    tau: usize,
    t: usize,
    gate: GateParams,
) -> Option<OutlierSelection> {
    let model0 = kde_fit(&observed[..tau]).ok()?;
    let model1 = kde_fit(&observed[tau..t]).ok()?;
    let result = local_density_test(&model0, &model1, gate.n_grid, gate.alpha_star).ok()?;
    let regions = extract_regions(&result);
    if regions.is_empty() {
        return None;
    }
    let post: Vec<(usize, f64)> = (tau + 1..=t).map(|i| (i, observed[i - 1])).collect();
    let selection = select_outliers(&regions, &post, gate.max_outliers);
    if selection.theta_indices.is_empty() {
        None
    } else {
        Some(selection)
    }
}

/// CPM loop with the outlier requirement: threshold exceedances that fail
/// to produce at least one outlier are skipped and monitoring continues.
fn run_gated_cpm(
    statistic: TwoSampleStatistic,
    table: &ThresholdTable,
    moments: &dyn MomentSource,
    gate: GateParams,
    z: &[f64],
) -> Result<RunOutcome> {
    let mut observed: Vec<f64> = Vec::with_capacity(z.len());
    for &value in z {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!(
                "confidence observation {} outside [0, 1]",
                value
            )));
        }
        observed.push(value);
        let t = observed.len();
        if t < table.t0 {
            continue;
        }
        let Some(h_t) = table.threshold_at(t) else {
            continue;
        };
        let scan = scan_splits(&statistic, &observed, table.candidate_stride, moments)?;
        if scan.w_max <= h_t {
            continue;
        }
        if let Some(selection) = gate_selection(&observed, scan.tau, t, gate) {
            return Ok(RunOutcome {
                outcome: DetectionOutcome {
                    d: Some(t),
                    k_hat: Some(scan.tau),
                    w_max: Some(scan.w_max),
                },
                outliers: selection.theta_indices,
            });
        }
    }
    Ok(RunOutcome::default())
}

/// One repetition of one (scenario, detector) experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub detector: String,
    pub seed: u64,
    pub outcome: DetectionOutcome,
    /// Loss of this run; absent only when nothing is scorable
    /// (null schedule without a detection).
    pub loss: Option<f64>,
    /// Batch delay `b(d) - b(K) - 1`, true detections only.
    pub delay: Option<usize>,
    pub false_alarm: bool,
    pub missed: bool,
    /// Drift fraction over the estimated post-change window, ungated run.
    pub theta_all: Option<f64>,
    /// Same window fraction when the outlier gate was active.
    pub theta_gated: Option<f64>,
    /// Drift fraction among the selected outliers.
    pub theta_outliers: Option<f64>,
    pub outlier_count: usize,
    /// Selected outlier indices (gated detections), in selection order.
    pub outliers: Vec<usize>,
}

/// Distribution summaries per (scenario, detector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenario: String,
    pub detector: String,
    #[serde(rename = "R")]
    pub repetitions: usize,
    pub false_alarm_prob: f64,
    pub missed_prob: f64,
    /// Batch delays of true detections, sorted.
    pub delays: Vec<usize>,
    /// Losses of scorable runs, sorted.
    pub losses: Vec<f64>,
    pub theta: ThetaReport,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThetaReport {
    pub all: Vec<f64>,
    pub gated: Vec<f64>,
    pub outliers: Vec<f64>,
}

/// Order-independent aggregation: distributions are sorted, rates counted.
pub fn aggregate(records: &[RunRecord]) -> AggregateReport {
    let n = records.len();
    let mut delays: Vec<usize> = records.iter().filter_map(|r| r.delay).collect();
    delays.sort_unstable();
    let mut losses: Vec<f64> = records.iter().filter_map(|r| r.loss).collect();
    losses.sort_unstable_by(|a, b| a.total_cmp(b));
    let sorted = |f: fn(&RunRecord) -> Option<f64>| -> Vec<f64> {
        let mut v: Vec<f64> = records.iter().filter_map(f).collect();
        v.sort_unstable_by(|a, b| a.total_cmp(b));
        v
    };
    AggregateReport {
        scenario: records.first().map(|r| r.scenario.clone()).unwrap_or_default(),
        detector: records.first().map(|r| r.detector.clone()).unwrap_or_default(),
        repetitions: n,
        false_alarm_prob: records.iter().filter(|r| r.false_alarm).count() as f64 / n as f64,
        missed_prob: records.iter().filter(|r| r.missed).count() as f64 / n as f64,
        delays,
        losses,
        theta: ThetaReport {
            all: sorted(|r| r.theta_all),
            gated: sorted(|r| r.theta_gated),
            outliers: sorted(|r| r.theta_outliers),
        },
    }
}

/// Full result of `run_experiment`: the per-repetition records plus their
/// aggregate.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub records: Vec<RunRecord>,
    pub report: AggregateReport,
}

/// Score one finished run against the stream's ground truth.
fn record_run(
    scenario: &DriftScenario,
    detector_id: &str,
    seed: u64,
    stream: &ConfidenceStream,
    run: RunOutcome,
    gated: bool,
    params: &LossParams,
) -> Result<RunRecord> {
    let k = stream.changepoint();
    let d = run.outcome.d;
    let batch_size = stream.batch_size();

    let false_alarm = match (d, k) {
        (Some(_), None) => true,
        (Some(d), Some(k)) => d <= k,
        (None, _) => false,
    };
    let missed = d.is_none() && k.is_some();

    let run_loss = match (d, k) {
        (None, None) => None,
        _ => Some(loss(k, d, scenario.schedule(), batch_size, params)?),
    };

    // True detection: the estimated drift onset (k_hat + 1) lies past the
    // true changepoint and the detection batch is past the change batch.
    let delay = match (d, k, run.outcome.k_hat) {
        (Some(d), Some(k), Some(k_hat)) if k_hat >= k && d > k => {
            let bd = batch_of(d, batch_size)?.get();
            let bk = batch_of(k, batch_size)?.get();
            (bd > bk).then(|| bd - bk - 1)
        }
        _ => None,
    };

    // Window fraction over the estimated post-change indices.
    let theta_window = match (d, run.outcome.k_hat) {
        (Some(d), Some(k_hat)) if k_hat < d => {
            let indices: Vec<usize> = (k_hat + 1..=d).collect();
            Some(drift_fraction(&indices, stream)?)
        }
        _ => None,
    };
    let theta_outliers = if run.outliers.is_empty() {
        None
    } else {
        Some(drift_fraction(&run.outliers, stream)?)
    };

    Ok(RunRecord {
        scenario: scenario.name().to_string(),
        detector: detector_id.to_string(),
        seed,
        outcome: run.outcome,
        loss: run_loss,
        delay,
        false_alarm,
        missed,
        theta_all: if gated { None } else { theta_window },
        theta_gated: if gated { theta_window } else { None },
        theta_outliers,
        outlier_count: run.outliers.len(),
        outliers: run.outliers,
    })
}

/// Run `repetitions` independent repetitions of one (scenario, detector)
/// pair. Stream seeds derive from `(master_seed, repetition)` only, so
/// detectors evaluated under the same master seed face identical streams.
pub fn run_experiment(
    detector_id: &str,
    spec: &DetectorSpec,
    scenario: &DriftScenario,
    source: &ConfidenceSource,
    batch_size: usize,
    repetitions: usize,
    master_seed: u64,
    params: &LossParams,
) -> Result<Experiment> {
    if repetitions == 0 {
        return Err(Error::invalid("repetitions must be >= 1"));
    }
    params.validate()?;
    let gated = spec.uses_gate();
    let records: Vec<RunRecord> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let stream_seed = derive_seed(master_seed, &[4, rep as u64]);
            let stream = synthesize_stream(scenario, source, batch_size, stream_seed)?;
            let run = spec.run(&stream.confidences(), batch_size)?;
            record_run(scenario, detector_id, stream_seed, &stream, run, gated, params)
        })
        .collect::<Result<_>>()?;
    let report = aggregate(&records);
    Ok(Experiment { records, report })
}

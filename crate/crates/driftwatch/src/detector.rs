//! The online change point detector.
//!
//! At each evaluation point the detector scans every candidate before/after
//! split of the observed sequence, normalizes the split statistics against
//! their null moments, and compares the maximum to the calibrated threshold
//! `h_t`. The first exceedance yields the detection time `d` and the
//! winning split as the changepoint estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{normalize_statistic, MomentSource};
use crate::stats::TwoSampleStatistic;
use crate::threshold::ThresholdTable;

/// Result of scanning all candidate splits at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScan {
    /// Argmax split position (the changepoint estimate).
    pub tau: usize,
    /// The winning normalized statistic.
    pub w_max: f64,
}

/// Scan every candidate split of `z` and return the most significant one.
///
/// Candidates are multiples of `candidate_stride` within
/// `minimum_segment ..= len - minimum_segment`; ties in the maximum break
/// toward the smallest split position.
pub fn scan_splits(
    stat: &TwoSampleStatistic,
    z: &[f64],
    candidate_stride: usize,
    moments: &dyn MomentSource,
) -> Result<SplitScan> {
    let t = z.len();
    let candidates = stat.candidate_splits(t, candidate_stride);
    if candidates.is_empty() {
        return Err(Error::invalid(format!(
            "no candidate split for length {} with stride {} and minimum segment {}",
            t, candidate_stride, stat.minimum_segment
        )));
    }
    let raws = stat.raw_scan(z, &candidates)?;
    let mut best: Option<SplitScan> = None;
    for (&k, &raw) in candidates.iter().zip(raws.iter()) {
        let w = normalize_statistic(stat.kind, raw, k, t - k, moments)?;
        let better = match best {
            None => true,
            Some(b) => w > b.w_max,
        };
        if better {
            best = Some(SplitScan { tau: k, w_max: w });
        }
    }
    Ok(best.expect("candidates are nonempty"))
}

/// Outcome of one detection run. `d = None` encodes "no detection"
/// (the paper's `d = infinity`), in which case `k_hat` is also absent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionOutcome {
    /// Detection time, or `None` when the stream ended without detection.
    pub d: Option<usize>,
    /// Estimated changepoint (the winning split position).
    pub k_hat: Option<usize>,
    /// Winning normalized statistic at the detection time.
    pub w_max: Option<f64>,
}

impl DetectionOutcome {
    pub fn none() -> Self {
        Self {
            d: None,
            k_hat: None,
            w_max: None,
        }
    }

    pub fn is_detection(&self) -> bool {
        self.d.is_some()
    }
}

/// Detector lifecycle phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpmStatus {
    /// Inside the stabilization period; no detection possible.
    Warming,
    /// Past warm-up, still testing.
    Monitoring,
    /// A detection latched; further steps are rejected.
    Detected,
}

/// Online detector state over a growing observation sequence.
///
/// One state per stream; distinct states may run concurrently. After a
/// detection the state refuses further observations; start a fresh state
/// to keep monitoring.
pub struct CpmState<'a> {
    stat: TwoSampleStatistic,
    table: &'a ThresholdTable,
    moments: &'a dyn MomentSource,
    require_unit_interval: bool,
    observed: Vec<f64>,
    status: CpmStatus,
    detection: DetectionOutcome,
}

impl<'a> CpmState<'a> {
    /// Detector over arbitrary real observations.
    pub fn new(
        stat: TwoSampleStatistic,
        table: &'a ThresholdTable,
        moments: &'a dyn MomentSource,
    ) -> Self {
        Self {
            stat,
            table,
            moments,
            require_unit_interval: false,
            observed: Vec::new(),
            status: CpmStatus::Warming,
            detection: DetectionOutcome::none(),
        }
    }

    /// Detector over a declared confidence stream: observations outside
    /// `[0, 1]` are rejected at the door.
    pub fn for_confidences(
        stat: TwoSampleStatistic,
        table: &'a ThresholdTable,
        moments: &'a dyn MomentSource,
    ) -> Self {
        Self {
            require_unit_interval: true,
            ..Self::new(stat, table, moments)
        }
    }

    pub fn status(&self) -> CpmStatus {
        self.status
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    /// The latched detection, or a `none` outcome while monitoring.
    pub fn detection(&self) -> DetectionOutcome {
        self.detection
    }

    /// Append one observation; at evaluation points past warm-up, scan the
    /// splits and test against `h_t`.
    pub fn step(&mut self, z_next: f64) -> Result<CpmStatus> {
        if self.status == CpmStatus::Detected {
            return Err(Error::AlreadyDetected);
        }
        if !z_next.is_finite() {
            return Err(Error::invalid("observation must be finite"));
        }
        if self.require_unit_interval && !(0.0..=1.0).contains(&z_next) {
            return Err(Error::invalid(format!(
                "confidence observation {} outside [0, 1]",
                z_next
            )));
        }
        self.observed.push(z_next);
        let t = self.observed.len();
        if t < self.table.t0 {
            self.status = CpmStatus::Warming;
            return Ok(self.status);
        }
        self.status = CpmStatus::Monitoring;
        if let Some(h_t) = self.table.threshold_at(t) {
            let scan = scan_splits(
                &self.stat,
                &self.observed,
                self.table.candidate_stride,
                self.moments,
            )?;
            if scan.w_max > h_t {
                self.status = CpmStatus::Detected;
                self.detection = DetectionOutcome {
                    d: Some(t),
                    k_hat: Some(scan.tau),
                    w_max: Some(scan.w_max),
                };
            }
        }
        Ok(self.status)
    }

    /// Feed observations until a detection latches or the input ends.
    pub fn run(&mut self, zs: &[f64]) -> Result<DetectionOutcome> {
        for &z in zs {
            if self.step(z)? == CpmStatus::Detected {
                break;
            }
        }
        Ok(self.detection)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MonteCarloMoments;
    use crate::stats::StatisticKind;
    use crate::threshold::{calibrate_thresholds, AlphaMode, CalibrationConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table_and_moments(alpha: f64) -> (ThresholdTable, MonteCarloMoments) {
        let moments = MonteCarloMoments::new(10).with_replicates(500).with_grid(2, 5);
        let config = CalibrationConfig {
            statistic_kind: StatisticKind::CramerVonMises,
            alpha_mode: AlphaMode::PerEvaluationHazard,
            alpha,
            t0: 25,
            horizon: 150,
            evaluation_stride: 5,
            candidate_stride: 5,
            num_streams: 500,
            seed: 12,
        };
        let table = calibrate_thresholds(&config, &moments).unwrap();
        (table, moments)
    }

    #[test]
    fn warmup_never_detects() {
        let (table, moments) = table_and_moments(0.05);
        let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
        let mut state = CpmState::new(stat, &table, &moments);
        for i in 0..24 {
            // Wild values; still inside warm-up.
            let status = state.step(if i % 2 == 0 { 0.0 } else { 1.0 }).unwrap();
            assert_eq!(status, CpmStatus::Warming);
        }
        assert!(!state.detection().is_detection());
    }

    #[test]
    fn an_abrupt_shift_is_detected_after_the_changepoint() {
        let (table, moments) = table_and_moments(0.05);
        let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut z: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..0.3)).collect();
        z.extend((0..60).map(|_| rng.gen_range(0.7..1.0f64)));
        let mut state = CpmState::for_confidences(stat, &table, &moments);
        let outcome = state.run(&z).unwrap();
        let d = outcome.d.expect("expected a detection");
        assert!(d > 60, "detected at {} before the changepoint", d);
        let k_hat = outcome.k_hat.unwrap();
        assert!(
            (50..=70).contains(&k_hat),
            "changepoint estimate {} far from 60",
            k_hat
        );
        assert!(outcome.w_max.unwrap() > table.threshold_at(d).unwrap());
    }

    #[test]
    fn stepping_a_detected_state_is_rejected() {
        let (table, moments) = table_and_moments(0.05);
        let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut z: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..0.3)).collect();
        z.extend((0..60).map(|_| rng.gen_range(0.7..1.0f64)));
        let mut state = CpmState::for_confidences(stat, &table, &moments);
        state.run(&z).unwrap();
        assert_eq!(state.status(), CpmStatus::Detected);
        match state.step(0.5) {
            Err(Error::AlreadyDetected) => {}
            other => panic!("expected AlreadyDetected, got {:?}", other),
        }
    }

    #[test]
    fn confidence_mode_rejects_out_of_range_values() {
        let (table, moments) = table_and_moments(0.05);
        let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
        let mut state = CpmState::for_confidences(stat, &table, &moments);
        assert!(state.step(1.5).is_err());
        let mut free = CpmState::new(stat, &table, &moments);
        assert!(free.step(1.5).is_ok());
    }

    #[test]
    fn detection_is_deterministic() {
        let (table, moments) = table_and_moments(0.05);
        let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut z: Vec<f64> = (0..70).map(|_| rng.gen_range(0.2..0.5)).collect();
        z.extend((0..50).map(|_| rng.gen_range(0.5..0.9f64)));
        let run = |zs: &[f64]| {
            let mut s = CpmState::new(stat, &table, &moments);
            s.run(zs).unwrap()
        };
        assert_eq!(run(&z), run(&z));
    }

    #[test]
    fn constant_stream_with_student_t_propagates_degeneracy() {
        let moments = MonteCarloMoments::new(10).with_replicates(200).with_grid(2, 5);
        let config = CalibrationConfig {
            statistic_kind: StatisticKind::StudentT,
            alpha_mode: AlphaMode::PerEvaluationHazard,
            alpha: 0.05,
            t0: 25,
            horizon: 50,
            evaluation_stride: 5,
            candidate_stride: 5,
            num_streams: 200,
            seed: 3,
        };
        let table = calibrate_thresholds(&config, &moments).unwrap();
        let stat = TwoSampleStatistic::new(StatisticKind::StudentT);
        let mut state = CpmState::new(stat, &table, &moments);
        let mut saw_degenerate = false;
        for _ in 0..30 {
            match state.step(0.5) {
                Ok(_) => {}
                Err(Error::DegenerateSample(_)) => {
                    saw_degenerate = true;
                    break;
                }
                Err(other) => panic!("unexpected error {:?}", other),
            }
        }
        assert!(saw_degenerate, "constant stream should hit a degenerate scan");
    }

    #[test]
    fn scan_splits_with_stride_equal_to_length_errors() {
        let moments = MonteCarloMoments::new(10).with_replicates(200);
        let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
        let z = vec![0.1, 0.9, 0.2, 0.8, 0.3, 0.7];
        assert!(scan_splits(&stat, &z, z.len(), &moments).is_err());
    }

    #[test]
    fn scan_splits_prefers_the_separating_split() {
        let moments = MonteCarloMoments::new(10).with_replicates(1000);
        let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut z: Vec<f64> = (0..50).map(|_| 0.85 + 0.1 * rng.gen::<f64>()).collect();
        z.extend((0..50).map(|_| 0.05 + 0.1 * rng.gen::<f64>()));
        let scan = scan_splits(&stat, &z, 1, &moments).unwrap();
        assert!(
            (45..=55).contains(&scan.tau),
            "expected split near 50, got {}",
            scan.tau
        );
    }
}

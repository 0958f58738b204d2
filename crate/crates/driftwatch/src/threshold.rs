//! Critical-value calibration for the sequential detector.
//!
//! The detector compares the maximum normalized split statistic `W_t`
//! against a time-growing threshold `h_t`. Thresholds are calibrated by
//! simulation so that, at every evaluation point, the probability of
//! exceeding `h_t` *conditional on not having exceeded any earlier
//! threshold* equals the per-evaluation hazard. Streams that exceed a
//! threshold are eliminated before the next point is processed, which is
//! what realizes the conditional property.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{normalize_statistic, MomentSource};
use crate::seed::derive_seed;
use crate::stats::{StatisticKind, TwoSampleStatistic};

/// How `alpha` parameterizes the false-alarm budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `alpha` is the conditional exceedance probability at each
    /// evaluation point (reciprocal of ARL0 in evaluation units).
    PerEvaluationHazard,
    /// `alpha` is the total null false-alarm probability over the whole
    /// horizon; the per-evaluation hazard becomes
    /// `1 - (1 - alpha)^(1/E)` for `E` evaluation points.
    HorizonTotal,
}

impl AlphaMode {
    pub fn name(self) -> &'static str {
        match self {
            AlphaMode::PerEvaluationHazard => "per_evaluation_hazard",
            AlphaMode::HorizonTotal => "horizon_total",
        }
    }
}

pub const DEFAULT_WARMUP: usize = 25;

/// Everything that determines a threshold table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub statistic_kind: StatisticKind,
    pub alpha_mode: AlphaMode,
    pub alpha: f64,
    /// Warm-up length; the first evaluation happens at `t = t0`.
    pub t0: usize,
    /// Last stream length covered by the table.
    pub horizon: usize,
    /// Evaluations happen at `t0, t0 + stride, ...` up to the horizon.
    pub evaluation_stride: usize,
    /// Candidate splits are multiples of this stride.
    pub candidate_stride: usize,
    pub num_streams: usize,
    pub seed: u64,
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1); got {}",
                self.alpha
            )));
        }
        if self.t0 >= self.horizon {
            return Err(Error::config(format!(
                "t0 = {} must be below the horizon {}",
                self.t0, self.horizon
            )));
        }
        if self.evaluation_stride == 0 || self.candidate_stride == 0 {
            return Err(Error::config("strides must be >= 1"));
        }
        if self.num_streams < 2 {
            return Err(Error::config("num_streams must be >= 2"));
        }
        if self.t0 < 4 {
            return Err(Error::config(
                "t0 must be >= 4 so the first evaluation has a valid split",
            ));
        }
        Ok(())
    }

    /// The evaluation points `t0, t0 + stride, ... <= horizon`.
    pub fn evaluation_points(&self) -> Vec<usize> {
        (0..)
            .map(|i| self.t0 + i * self.evaluation_stride)
            .take_while(|&t| t <= self.horizon)
            .collect()
    }

    /// Per-evaluation hazard implied by the mode.
    pub fn evaluation_hazard(&self) -> f64 {
        match self.alpha_mode {
            AlphaMode::PerEvaluationHazard => self.alpha,
            AlphaMode::HorizonTotal => {
                let e = self.evaluation_points().len() as f64;
                1.0 - (1.0 - self.alpha).powf(1.0 / e)
            }
        }
    }
}

/// Calibrated critical values `h_t` for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub statistic_kind: StatisticKind,
    pub alpha_mode: AlphaMode,
    pub alpha: f64,
    pub t0: usize,
    pub horizon: usize,
    pub evaluation_stride: usize,
    pub candidate_stride: usize,
    pub num_streams: usize,
    pub seed: u64,
    /// `[t, h_t]` pairs, ascending in `t`, nondecreasing in `h_t`.
    values: Vec<(usize, f64)>,
}

impl ThresholdTable {
    pub fn values(&self) -> &[(usize, f64)] {
        &self.values
    }

    /// Threshold at `t`, if `t` is one of the table's evaluation points.
    pub fn threshold_at(&self, t: usize) -> Option<f64> {
        self.values
            .binary_search_by_key(&t, |&(tt, _)| tt)
            .ok()
            .map(|i| self.values[i].1)
    }

    pub fn evaluation_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().map(|&(t, _)| t)
    }

    /// Seed for the moment provider paired with this table. The cache file
    /// does not carry moments; a provider reconstructed from this seed (and
    /// the table's strides) reproduces the calibration normalization.
    pub fn moment_seed(&self) -> u64 {
        derive_seed(self.seed, &[0x4d4f4d, 0x53]) // "MOM", "S"
    }

    fn validate(&self) -> Result<()> {
        let mut prev: Option<(usize, f64)> = None;
        for &(t, h) in &self.values {
            if !h.is_finite() || h <= 0.0 {
                return Err(Error::invalid(format!(
                    "threshold at t={} is not finite and positive: {}",
                    t, h
                )));
            }
            if let Some((pt, ph)) = prev {
                if t <= pt {
                    return Err(Error::invalid(format!(
                        "evaluation points must be strictly increasing: {} after {}",
                        t, pt
                    )));
                }
                if h < ph {
                    return Err(Error::invalid(format!(
                        "thresholds must be nondecreasing: h_{} = {} below h_{} = {}",
                        t, h, pt, ph
                    )));
                }
            }
            prev = Some((t, h));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<()> {
        let s = self.to_json_string()?;
        writer.write_all(s.as_bytes())?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_json(std::fs::File::create(path)?)
    }

    /// Load a cache file, validating monotonicity and positivity.
    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let table: ThresholdTable = serde_json::from_reader(reader)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingCache {
                path: path.to_path_buf(),
            });
        }
        Self::read_json(std::fs::File::open(path)?)
    }
}

/// Maximum normalized split statistic of `z[..t]` for each evaluation point.
pub fn w_max_trajectory(
    stat: &TwoSampleStatistic,
    z: &[f64],
    eval_points: &[usize],
    candidate_stride: usize,
    moments: &dyn MomentSource,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(eval_points.len());
    for &t in eval_points {
        let candidates = stat.candidate_splits(t, candidate_stride);
        if candidates.is_empty() {
            return Err(Error::invalid(format!(
                "no candidate split at evaluation point t={}",
                t
            )));
        }
        let raws = stat.raw_scan(&z[..t], &candidates)?;
        let mut best = f64::NEG_INFINITY;
        for (&k, &raw) in candidates.iter().zip(raws.iter()) {
            let w = normalize_statistic(stat.kind, raw, k, t - k, moments)?;
            if w > best {
                best = w;
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Empirical upper quantile used for threshold setting: the smallest sample
/// value with at least `ceil((1 - hazard) * n)` values at or below it.
fn upper_quantile(sorted: &[f64], hazard: f64) -> f64 {
    let n = sorted.len();
    let rank = ((1.0 - hazard) * n as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(n - 1)]
}

/// Calibrate the critical-value sequence for `config`.
///
/// Simulates `num_streams` null streams (iid uniform for CvM, iid normal
/// for Student-T), walks the evaluation points in order, sets `h_t` to the
/// empirical `(1 - hazard)` quantile of `W_t` among still-surviving
/// streams, then eliminates the streams exceeding `h_t`. Thresholds are
/// clamped to be nondecreasing.
pub fn calibrate_thresholds(
    config: &CalibrationConfig,
    moments: &dyn MomentSource,
) -> Result<ThresholdTable> {
    config.validate()?;
    let stat = TwoSampleStatistic::new(config.statistic_kind);
    let eval_points = config.evaluation_points();
    let hazard = config.evaluation_hazard();

    // Prime the moment cache sequentially so the parallel phase below is
    // read-mostly.
    for &t in &eval_points {
        for k in stat.candidate_splits(t, config.candidate_stride) {
            moments.moments(config.statistic_kind, k, t - k)?;
        }
    }

    let trajectories: Vec<Vec<f64>> = (0..config.num_streams)
        .into_par_iter()
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[2, i as u64]));
            let z: Vec<f64> = match config.statistic_kind {
                StatisticKind::CramerVonMises => {
                    (0..config.horizon).map(|_| rng.gen::<f64>()).collect()
                }
                StatisticKind::StudentT => (0..config.horizon)
                    .map(|_| rng.sample(StandardNormal))
                    .collect(),
            };
            w_max_trajectory(&stat, &z, &eval_points, config.candidate_stride, moments)
        })
        .collect::<Result<_>>()?;

    let mut alive: Vec<bool> = vec![true; config.num_streams];
    let mut values = Vec::with_capacity(eval_points.len());
    let mut prev_h = f64::NEG_INFINITY;
    for (e, &t) in eval_points.iter().enumerate() {
        let mut survivors: Vec<f64> = trajectories
            .iter()
            .zip(alive.iter())
            .filter(|(_, &a)| a)
            .map(|(traj, _)| traj[e])
            .collect();
        // Too few survivors to place even one stream above the quantile:
        // the calibration can no longer realize the conditional hazard.
        if (survivors.len() as f64) * hazard < 1.0 {
            return Err(Error::SurvivorsExhausted {
                num_streams: config.num_streams,
                t,
            });
        }
        survivors.sort_unstable_by(|a, b| a.total_cmp(b));
        let h = upper_quantile(&survivors, hazard).max(prev_h);
        prev_h = h;
        values.push((t, h));
        for (traj, a) in trajectories.iter().zip(alive.iter_mut()) {
            if *a && traj[e] > h {
                *a = false;
            }
        }
    }

    let table = ThresholdTable {
        statistic_kind: config.statistic_kind,
        alpha_mode: config.alpha_mode,
        alpha: config.alpha,
        t0: config.t0,
        horizon: config.horizon,
        evaluation_stride: config.evaluation_stride,
        candidate_stride: config.candidate_stride,
        num_streams: config.num_streams,
        seed: config.seed,
        values,
    };
    table.validate()?;
    Ok(table)
}

//! Null moments for statistic normalization.
//!
//! A split statistic is normalized as `(raw - mean_H0) / sd_H0`, where the
//! moments are those of the raw statistic under the no-change hypothesis at
//! the split's sample sizes. The Monte-Carlo provider estimates them by
//! simulation and is the default; it is uniformly correct for any statistic
//! the crate supports. Closed-form providers can be plugged in through the
//! same trait.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::stats::{StatisticKind, TwoSampleStatistic, DEFAULT_MINIMUM_SEGMENT};

/// Null mean and standard deviation of a raw statistic at fixed sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullMoments {
    pub mean: f64,
    pub sd: f64,
}

/// Supplies null moments keyed by (statistic, sample sizes).
pub trait MomentSource: Send + Sync {
    fn moments(&self, kind: StatisticKind, n0: usize, n1: usize) -> Result<NullMoments>;
}

/// Normalize a raw statistic: `(raw - mean_H0) / sd_H0`.
pub fn normalize_statistic(
    kind: StatisticKind,
    raw: f64,
    n0: usize,
    n1: usize,
    moments: &dyn MomentSource,
) -> Result<f64> {
    let m = moments.moments(kind, n0, n1)?;
    if !(m.sd > 0.0) || !m.sd.is_finite() || !m.mean.is_finite() {
        return Err(Error::MissingMoments {
            kind: kind.name().to_string(),
            n0,
            n1,
        });
    }
    Ok((raw - m.mean) / m.sd)
}

pub const DEFAULT_MOMENT_REPLICATES: usize = 2_000;

/// Monte-Carlo moment provider with an internal cache keyed by
/// `(kind, n0, n1)`.
///
/// Null streams are standard uniform for the rank-based CvM statistic and
/// standard normal for Student-T. Each replicate draws from a seed derived
/// from `(seed, kind, sizes, replicate)`, so results do not depend on call
/// order or worker count.
///
/// When the requested pair lies on the scan grid (`n0` a multiple of
/// `candidate_stride`), one simulation pass fills the moments of every
/// split of the same total length at once, which is what keeps threshold
/// calibration tractable.
pub struct MonteCarloMoments {
    replicates: usize,
    seed: u64,
    minimum_segment: usize,
    candidate_stride: usize,
    cache: Mutex<HashMap<(StatisticKind, usize, usize), NullMoments>>,
}

impl MonteCarloMoments {
    pub fn new(seed: u64) -> Self {
        Self {
            replicates: DEFAULT_MOMENT_REPLICATES,
            seed,
            minimum_segment: DEFAULT_MINIMUM_SEGMENT,
            candidate_stride: 1,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Number of null replicates per sample-size pair.
    pub fn with_replicates(mut self, replicates: usize) -> Self {
        assert!(replicates >= 2, "need at least 2 replicates for a variance");
        self.replicates = replicates;
        self
    }

    /// Match the provider's batch-fill grid to the detector's scan grid.
    pub fn with_grid(mut self, minimum_segment: usize, candidate_stride: usize) -> Self {
        assert!(minimum_segment >= 2 && candidate_stride >= 1);
        self.minimum_segment = minimum_segment;
        self.candidate_stride = candidate_stride;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn statistic(&self, kind: StatisticKind) -> TwoSampleStatistic {
        TwoSampleStatistic {
            kind,
            minimum_segment: self.minimum_segment,
        }
    }

    fn draw_null(kind: StatisticKind, rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        match kind {
            StatisticKind::CramerVonMises => (0..len).map(|_| rng.gen::<f64>()).collect(),
            StatisticKind::StudentT => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    fn kind_tag(kind: StatisticKind) -> u64 {
        match kind {
            StatisticKind::StudentT => 1,
            StatisticKind::CramerVonMises => 2,
        }
    }

    /// Moments of every split on the grid at total length `total`.
    fn fill_batch(&self, kind: StatisticKind, total: usize) -> Result<Vec<(usize, NullMoments)>> {
        let stat = self.statistic(kind);
        let candidates = stat.candidate_splits(total, self.candidate_stride);
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let tag = Self::kind_tag(kind);
        let rows: Vec<Vec<f64>> = (0..self.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    self.seed,
                    &[0, tag, total as u64, r as u64],
                ));
                let z = Self::draw_null(kind, &mut rng, total);
                stat.raw_scan(&z, &candidates)
            })
            .collect::<Result<_>>()?;
        Ok(candidates
            .iter()
            .enumerate()
            .map(|(c, &k)| (k, summarize(rows.iter().map(|row| row[c]))))
            .collect())
    }

    /// Moments of one off-grid pair.
    fn fill_single(&self, kind: StatisticKind, n0: usize, n1: usize) -> Result<NullMoments> {
        let stat = self.statistic(kind);
        let tag = Self::kind_tag(kind);
        let raws: Vec<f64> = (0..self.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    self.seed,
                    &[1, tag, n0 as u64, n1 as u64, r as u64],
                ));
                let z = Self::draw_null(kind, &mut rng, n0 + n1);
                stat.raw(&z[..n0], &z[n0..])
            })
            .collect::<Result<_>>()?;
        Ok(summarize(raws.into_iter()))
    }

    fn on_grid(&self, n0: usize, n1: usize) -> bool {
        n0 % self.candidate_stride == 0
            && n0 >= self.minimum_segment
            && n1 >= self.minimum_segment
    }
}

fn summarize(values: impl Iterator<Item = f64>) -> NullMoments {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    NullMoments {
        mean,
        sd: (ss / (n - 1.0)).sqrt(),
    }
}

impl MomentSource for MonteCarloMoments {
    fn moments(&self, kind: StatisticKind, n0: usize, n1: usize) -> Result<NullMoments> {
        if n0 < self.minimum_segment || n1 < self.minimum_segment {
            return Err(Error::MissingMoments {
                kind: kind.name().to_string(),
                n0,
                n1,
            });
        }
        if let Some(m) = self.cache.lock().unwrap().get(&(kind, n0, n1)) {
            return Ok(*m);
        }
        if self.on_grid(n0, n1) {
            let batch = self.fill_batch(kind, n0 + n1)?;
            let mut cache = self.cache.lock().unwrap();
            for (k, m) in batch {
                cache.entry((kind, k, n0 + n1 - k)).or_insert(m);
            }
            cache.get(&(kind, n0, n1)).copied().ok_or(Error::MissingMoments {
                kind: kind.name().to_string(),
                n0,
                n1,
            })
        } else {
            let m = self.fill_single(kind, n0, n1)?;
            self.cache.lock().unwrap().insert((kind, n0, n1), m);
            Ok(m)
        }
    }
}

//! Two-sample goodness-of-fit statistics and split scans.
//!
//! The detector compares a before/after split of the observed stream with
//! one of two statistics: the absolute pooled-variance Student-T statistic
//! (mean changes) or the two-sample Cramer-von Mises criterion (arbitrary
//! distribution changes).
//!
//! The Cramer-von Mises value is defined directly on the empirical CDFs:
//!
//! ```text
//! T = n*m / (n+m)^2 * sum over all pooled points x of (F_n(x) - G_m(x))^2
//! ```
//!
//! with `F_n(x) = #{a <= x}/n` and tied pooled points each contributing a
//! term. Both the single-pair entry point and the incremental split scan
//! accumulate the sum over ascending tie groups with identical arithmetic,
//! so a scan and a per-split evaluation agree bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which two-sample statistic the detector uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    StudentT,
    CramerVonMises,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::StudentT => "student_t",
            StatisticKind::CramerVonMises => "cramer_von_mises",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "student_t" => Some(StatisticKind::StudentT),
            "cramer_von_mises" => Some(StatisticKind::CramerVonMises),
            _ => None,
        }
    }
}

/// A two-sample statistic with its minimum admissible segment length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoSampleStatistic {
    pub kind: StatisticKind,
    pub minimum_segment: usize,
}

pub const DEFAULT_MINIMUM_SEGMENT: usize = 2;

impl TwoSampleStatistic {
    pub fn new(kind: StatisticKind) -> Self {
        Self {
            kind,
            minimum_segment: DEFAULT_MINIMUM_SEGMENT,
        }
    }

    pub fn with_minimum_segment(kind: StatisticKind, minimum_segment: usize) -> Result<Self> {
        if minimum_segment < 2 {
            return Err(Error::invalid("minimum_segment must be >= 2"));
        }
        Ok(Self {
            kind,
            minimum_segment,
        })
    }

    /// Raw (unnormalized) statistic of two samples.
    pub fn raw(&self, sample0: &[f64], sample1: &[f64]) -> Result<f64> {
        if sample0.len() < self.minimum_segment || sample1.len() < self.minimum_segment {
            return Err(Error::invalid(format!(
                "samples of lengths ({}, {}) are shorter than minimum_segment {}",
                sample0.len(),
                sample1.len(),
                self.minimum_segment
            )));
        }
        match self.kind {
            StatisticKind::StudentT => abs_student_t(sample0, sample1),
            StatisticKind::CramerVonMises => Ok(cramer_von_mises(sample0, sample1)),
        }
    }

    /// Candidate split positions for a sequence of length `t`:
    /// multiples of `candidate_stride` within
    /// `minimum_segment ..= t - minimum_segment`.
    pub fn candidate_splits(&self, t: usize, candidate_stride: usize) -> Vec<usize> {
        if candidate_stride == 0 || t < 2 * self.minimum_segment {
            return Vec::new();
        }
        let hi = t - self.minimum_segment;
        (1..)
            .map(|i| i * candidate_stride)
            .take_while(|&k| k <= hi)
            .filter(|&k| k >= self.minimum_segment)
            .collect()
    }

    /// Raw statistic at every candidate split of `z`.
    ///
    /// `candidates` must be ascending positions from [`Self::candidate_splits`];
    /// entry `i` is `raw(&z[..candidates[i]], &z[candidates[i]..])`.
    pub fn raw_scan(&self, z: &[f64], candidates: &[usize]) -> Result<Vec<f64>> {
        match self.kind {
            StatisticKind::StudentT => candidates
                .iter()
                .map(|&k| abs_student_t(&z[..k], &z[k..]))
                .collect(),
            StatisticKind::CramerVonMises => Ok(cvm_scan(z, candidates)),
        }
    }
}

/// |t| for the pooled-variance two-sample Student-T statistic.
fn abs_student_t(a: &[f64], b: &[f64]) -> Result<f64> {
    let (n0, n1) = (a.len() as f64, b.len() as f64);
    let m0 = a.iter().sum::<f64>() / n0;
    let m1 = b.iter().sum::<f64>() / n1;
    let ss0: f64 = a.iter().map(|x| (x - m0) * (x - m0)).sum();
    let ss1: f64 = b.iter().map(|x| (x - m1) * (x - m1)).sum();
    let pooled = (ss0 + ss1) / (n0 + n1 - 2.0);
    if pooled <= 0.0 {
        return Err(Error::degenerate(
            "zero pooled variance in Student-T statistic",
        ));
    }
    let se = (pooled * (1.0 / n0 + 1.0 / n1)).sqrt();
    Ok(((m0 - m1) / se).abs())
}

/// Accumulate the CvM sum over ascending tie groups.
///
/// Each item is `(group_size, count_from_sample0)`; the shared arithmetic
/// here is what makes scan and per-pair evaluations bit-identical.
fn cvm_group_sum(groups: impl Iterator<Item = (usize, usize)>, n0: f64, n1: f64) -> f64 {
    let mut le0 = 0.0; // sample0 observations <= current value
    let mut le_all = 0.0; // pooled observations <= current value
    let mut sum = 0.0;
    for (size, in0) in groups {
        le0 += in0 as f64;
        le_all += size as f64;
        let f = le0 / n0;
        let g = (le_all - le0) / n1;
        let d = f - g;
        sum += d * d * size as f64;
    }
    sum
}

/// Two-sample Cramer-von Mises criterion of two explicit samples.
fn cramer_von_mises(a: &[f64], b: &[f64]) -> f64 {
    let n0 = a.len();
    let n1 = b.len();
    let total = n0 + n1;
    let mut pooled: Vec<(f64, bool)> = Vec::with_capacity(total);
    pooled.extend(a.iter().map(|&x| (x, true)));
    pooled.extend(b.iter().map(|&x| (x, false)));
    pooled.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));

    let groups = GroupIter {
        pooled: &pooled,
        idx: 0,
    };
    let sum = cvm_group_sum(groups, n0 as f64, n1 as f64);
    (n0 as f64 * n1 as f64) / (total as f64 * total as f64) * sum
}

struct GroupIter<'a> {
    pooled: &'a [(f64, bool)],
    idx: usize,
}

impl Iterator for GroupIter<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.idx >= self.pooled.len() {
            return None;
        }
        let value = self.pooled[self.idx].0;
        let mut size = 0;
        let mut in0 = 0;
        while self.idx < self.pooled.len() && self.pooled[self.idx].0 == value {
            size += 1;
            if self.pooled[self.idx].1 {
                in0 += 1;
            }
            self.idx += 1;
        }
        Some((size, in0))
    }
}

/// CvM at every candidate split of `z` with one sort of the pooled sequence.
///
/// Maintains per-tie-group prefix membership counts as the split position
/// advances; O(len(z)) per candidate after an O(t log t) sort.
fn cvm_scan(z: &[f64], candidates: &[usize]) -> Vec<f64> {
    let t = z.len();
    if candidates.is_empty() {
        return Vec::new();
    }

    let mut order: Vec<u32> = (0..t as u32).collect();
    order.sort_unstable_by(|&i, &j| z[i as usize].total_cmp(&z[j as usize]));

    // Tie groups over the sorted values.
    let mut group_of = vec![0u32; t]; // original index -> group id
    let mut group_sizes = Vec::new();
    {
        let mut g: u32 = 0;
        let mut i = 0;
        while i < t {
            let v = z[order[i] as usize];
            let mut size = 0usize;
            while i < t && z[order[i] as usize] == v {
                group_of[order[i] as usize] = g;
                size += 1;
                i += 1;
            }
            group_sizes.push(size);
            g += 1;
        }
    }

    let mut in_prefix = vec![0usize; group_sizes.len()];
    let mut next_obs = 0usize;
    let mut out = Vec::with_capacity(candidates.len());
    for &k in candidates {
        debug_assert!(k >= next_obs, "candidates must be ascending");
        while next_obs < k {
            in_prefix[group_of[next_obs] as usize] += 1;
            next_obs += 1;
        }
        let n0 = k;
        let n1 = t - k;
        let groups = group_sizes
            .iter()
            .zip(in_prefix.iter())
            .map(|(&size, &in0)| (size, in0));
        let sum = cvm_group_sum(groups, n0 as f64, n1 as f64);
        out.push((n0 as f64 * n1 as f64) / (t as f64 * t as f64) * sum);
    }
    out
}

//! Loss scoring, naive baselines, and the repeated-testing simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::stream::batch_of;

/// Penalties for the two failure modes. Both are negative and the false
/// alarm must cost more than the miss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    /// False-alarm penalty.
    pub l0: f64,
    /// Missed-alarm penalty.
    pub l1: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            l0: -1000.0,
            l1: -250.0,
        }
    }
}

impl LossParams {
    pub fn new(l0: f64, l1: f64) -> Result<Self> {
        let params = Self { l0, l1 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l0 < self.l1 && self.l1 < 0.0) {
            return Err(Error::invalid(format!(
                "loss penalties must satisfy l0 < l1 < 0; got l0={}, l1={}",
                self.l0, self.l1
            )));
        }
        Ok(())
    }
}

/// Compounding loss of one detection result.
///
/// `changepoint` and `detection` are observation indices; `None` encodes
/// "infinity" (no change / no detection). A detection at or before the
/// changepoint scores `l0`; a miss scores `l1`; a true detection in the
/// first post-change batch scores 0 and later detections decay toward `l1`
/// by compounding the traversed contamination values:
///
/// ```text
/// L = l1 - l1 / prod_{j=b(K)+1}^{b(d)} (1 + p_j)^((b(d)-j)/(b(d)-b(K)))
/// ```
pub fn loss(
    changepoint: Option<usize>,
    detection: Option<usize>,
    schedule: &[f64],
    batch_size: usize,
    params: &LossParams,
) -> Result<f64> {
    params.validate()?;
    if schedule.is_empty() {
        return Err(Error::invalid("empty contamination schedule"));
    }
    let total_batches = schedule.len();
    match (detection, changepoint) {
        (None, None) => Err(Error::invalid(
            "no changepoint and no detection: nothing to score",
        )),
        (None, Some(_)) => Ok(params.l1),
        (Some(d), k) => {
            let bd = batch_of(d, batch_size)?.get();
            if bd > total_batches {
                return Err(Error::invalid(format!(
                    "detection at t={} lies in batch {} beyond the schedule ({} batches)",
                    d, bd, total_batches
                )));
            }
            let k = match k {
                // A finite detection with no true change is a false alarm.
                None => return Ok(params.l0),
                Some(k) => k,
            };
            if d <= k {
                return Ok(params.l0);
            }
            let bk = batch_of(k, batch_size)?.get();
            // Empty product (detection inside the changepoint's own batch)
            // scores 0, matching the first-post-change-batch case.
            let span = (bd.max(bk + 1) - bk) as f64;
            let mut product = 1.0;
            for j in (bk + 1)..=bd {
                let exponent = (bd - j) as f64 / span;
                product *= (1.0 + schedule[j - 1]).powf(exponent);
            }
            Ok(params.l1 - params.l1 / product)
        }
    }
}

/// Two-sided pooled-variance two-sample t-test p-value.
///
/// Degenerate comparisons (zero pooled variance) yield p = 1 so a constant
/// batch cannot abort a whole run.
pub fn student_t_p_value(a: &[f64], b: &[f64]) -> f64 {
    let n0 = a.len() as f64;
    let n1 = b.len() as f64;
    if n0 < 2.0 || n1 < 2.0 {
        return 1.0;
    }
    let m0 = a.iter().sum::<f64>() / n0;
    let m1 = b.iter().sum::<f64>() / n1;
    let ss0: f64 = a.iter().map(|x| (x - m0) * (x - m0)).sum();
    let ss1: f64 = b.iter().map(|x| (x - m1) * (x - m1)).sum();
    let pooled = (ss0 + ss1) / (n0 + n1 - 2.0);
    if pooled <= 0.0 {
        return 1.0;
    }
    let se = (pooled * (1.0 / n0 + 1.0 / n1)).sqrt();
    let t = ((m0 - m1) / se).abs();
    let dist = StudentsT::new(0.0, 1.0, n0 + n1 - 2.0).expect("valid dof");
    (2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0)
}

/// Number of complete batches, requiring at least two.
fn complete_batches(len: usize, batch_size: usize) -> Result<usize> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    let batches = len / batch_size;
    if batches < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 complete batches; {} observations give {}",
            len, batches
        )));
    }
    Ok(batches)
}

/// Baseline: t-test batch 1 against each later batch; the first significant
/// batch `j` yields the estimate `B_hat = j - 1`. `None` means no estimate.
pub fn naive_pairwise(z: &[f64], batch_size: usize, alpha: f64) -> Result<Option<usize>> {
    let batches = complete_batches(z.len(), batch_size)?;
    let first = &z[..batch_size];
    for j in 2..=batches {
        let batch = &z[(j - 1) * batch_size..j * batch_size];
        if student_t_p_value(first, batch) <= alpha {
            return Ok(Some(j - 1));
        }
    }
    Ok(None)
}

/// Baseline imitating the before/after split scan without sequential
/// threshold control: at each batch `j`, the most significant batch-boundary
/// split decides; first significant `j` yields `B_hat = j - 1`.
pub fn naive_splits(z: &[f64], batch_size: usize, alpha: f64) -> Result<Option<usize>> {
    let batches = complete_batches(z.len(), batch_size)?;
    for j in 2..=batches {
        let mut min_p = f64::INFINITY;
        for k in 1..j {
            let prefix = &z[..k * batch_size];
            let suffix = &z[k * batch_size..j * batch_size];
            min_p = min_p.min(student_t_p_value(prefix, suffix));
        }
        if min_p <= alpha {
            return Ok(Some(j - 1));
        }
    }
    Ok(None)
}

/// Monte-Carlo summary of repeated testing on overlapping prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeekingSummary {
    pub alpha: f64,
    /// Probability that at least one of the prefix tests rejects.
    pub pr_v_ge_1: f64,
    /// Expected number of rejections.
    pub e_v: f64,
}

/// Simulate the false-alarm inflation of repeated testing: draw iid
/// standard normal sequences, run the known-variance two-sided z-test for
/// `H0: mu = 0` on every prefix `x_1..x_t` for `t = start..=n`, and count
/// rejections at level `alpha`.
pub fn peeking_simulation(
    alpha: f64,
    n: usize,
    start: usize,
    sims: usize,
    seed: u64,
) -> Result<PeekingSummary> {
    if start == 0 || start >= n {
        return Err(Error::invalid(format!(
            "need 1 <= start < n; got start={}, n={}",
            start, n
        )));
    }
    if sims == 0 {
        return Err(Error::invalid("sims must be >= 1"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1]; got {}",
            alpha
        )));
    }
    let counts: Vec<usize> = (0..sims)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3, s as u64]));
            let mut sum = 0.0;
            let mut rejections = 0usize;
            for t in 1..=n {
                sum += rng.sample::<f64, _>(StandardNormal);
                if t >= start {
                    let z = (sum / t as f64) * (t as f64).sqrt();
                    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
                    if p < alpha {
                        rejections += 1;
                    }
                }
            }
            rejections
        })
        .collect();
    let sims_f = sims as f64;
    Ok(PeekingSummary {
        alpha,
        pr_v_ge_1: counts.iter().filter(|&&v| v >= 1).count() as f64 / sims_f,
        e_v: counts.iter().sum::<usize>() as f64 / sims_f,
    })
}

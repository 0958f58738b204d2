//! Gaussian kernel density estimation with Silverman's bandwidth rule.

use crate::error::{Error, Result};

/// Gaussian kernel roughness: integral of the squared standard normal pdf.
pub(crate) const GAUSSIAN_ROUGHNESS: f64 = 0.28209479177387814; // 1 / (2 sqrt(pi))

const SQRT_2PI: f64 = 2.5066282746310002;

/// A fitted univariate Gaussian-kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    sample: Vec<f64>,
    bandwidth: f64,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Silverman's rule of thumb: `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`,
/// falling back to the sd when the IQR collapses to zero.
pub(crate) fn silverman_bandwidth(sd: f64, iqr: f64, n: usize) -> f64 {
    let mut scale = sd.min(iqr / 1.34);
    if scale == 0.0 {
        scale = sd;
    }
    0.9 * scale * (n as f64).powf(-0.2)
}

/// Fit a Gaussian KDE to `sample` (at least 5 points, not all equal).
pub fn kde_fit(sample: &[f64]) -> Result<KdeModel> {
    if sample.len() < 5 {
        return Err(Error::invalid(format!(
            "need at least 5 observations to fit a density; got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("density sample contains non-finite values"));
    }
    let n = sample.len();
    let mean = sample.iter().sum::<f64>() / n as f64;
    let ss: f64 = sample.iter().map(|z| (z - mean) * (z - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();

    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    if sorted[0] == sorted[n - 1] {
        return Err(Error::degenerate(
            "constant sample admits no density estimate (sd and IQR are both zero)",
        ));
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);

    let bandwidth = silverman_bandwidth(sd, iqr, n);
    if !(bandwidth > 0.0) {
        return Err(Error::degenerate("zero bandwidth"));
    }
    Ok(KdeModel {
        sample: sample.to_vec(),
        bandwidth,
    })
}

impl KdeModel {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    /// Density estimate at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.sample.len() as f64 * h * SQRT_2PI);
        let sum: f64 = self
            .sample
            .iter()
            .map(|&xi| {
                let u = (x - xi) / h;
                (-0.5 * u * u).exp()
            })
            .sum();
        norm * sum
    }

    /// Density at each grid point.
    pub fn density_on(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.density(x)).collect()
    }
}

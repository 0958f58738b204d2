//! Drift scenarios and synthetic stream generation.
//!
//! A [`DriftScenario`] is a per-batch contamination schedule `p_1..p_J`:
//! batch `j` contains a `p_j` fraction of drift-class observations. The
//! eight named scenarios keep their shapes under a configurable change
//! batch `B` and total batch count `J`, with the standard setting being
//! `B = 50`, `J = 100`.

use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ConfidenceStream, Observation};

/// Standard change batch: contamination may appear from batch `B + 1` on.
pub const DEFAULT_CHANGE_BATCH: usize = 50;
/// Standard total number of batches.
pub const DEFAULT_TOTAL_BATCHES: usize = 100;

/// The named contamination shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SuddenQuarter,
    SuddenHalf,
    SuddenFull,
    SuddenHalfReturn,
    SuddenFullReturn,
    GradualToHalf,
    GradualToFull,
    GradualLongDelay,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::SuddenQuarter,
        ScenarioKind::SuddenHalf,
        ScenarioKind::SuddenFull,
        ScenarioKind::SuddenHalfReturn,
        ScenarioKind::SuddenFullReturn,
        ScenarioKind::GradualToHalf,
        ScenarioKind::GradualToFull,
        ScenarioKind::GradualLongDelay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::SuddenQuarter => "sudden_quarter",
            ScenarioKind::SuddenHalf => "sudden_half",
            ScenarioKind::SuddenFull => "sudden_full",
            ScenarioKind::SuddenHalfReturn => "sudden_half_return",
            ScenarioKind::SuddenFullReturn => "sudden_full_return",
            ScenarioKind::GradualToHalf => "gradual_to_half",
            ScenarioKind::GradualToFull => "gradual_to_full",
            ScenarioKind::GradualLongDelay => "gradual_long_delay",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Contamination at batch `j` for change batch `b`.
    fn contamination(self, j: usize, b: usize) -> f64 {
        if j <= b {
            return 0.0;
        }
        let offset = j - b; // >= 1
        match self {
            ScenarioKind::SuddenQuarter => 0.25,
            ScenarioKind::SuddenHalf => 0.50,
            ScenarioKind::SuddenFull => 1.0,
            ScenarioKind::SuddenHalfReturn => {
                if offset <= 15 {
                    0.5
                } else {
                    0.0
                }
            }
            ScenarioKind::SuddenFullReturn => {
                if offset <= 15 {
                    1.0
                } else {
                    0.0
                }
            }
            ScenarioKind::GradualToHalf => {
                if offset <= 10 {
                    0.05 * offset as f64
                } else {
                    0.50
                }
            }
            ScenarioKind::GradualToFull => {
                if offset <= 20 {
                    0.05 * offset as f64
                } else {
                    1.0
                }
            }
            ScenarioKind::GradualLongDelay => (0.05 * offset.div_ceil(3) as f64).min(1.0),
        }
    }
}

/// A contamination schedule `p_1..p_J` with `p_j = 0` for all `j <= B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftScenario {
    name: String,
    schedule: Vec<f64>,
    change_batch: usize,
    total_batches: usize,
}

/// Serialized form of a custom scenario file.
#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    change_batch: usize,
    total_batches: usize,
    schedule: Vec<f64>,
}

impl DriftScenario {
    /// A named scenario at the standard scale (`B = 50`, `J = 100`).
    pub fn standard(kind: ScenarioKind) -> Self {
        Self::named(kind, DEFAULT_CHANGE_BATCH, DEFAULT_TOTAL_BATCHES)
    }

    /// A named scenario shape at an arbitrary scale.
    pub fn named(kind: ScenarioKind, change_batch: usize, total_batches: usize) -> Self {
        let schedule = (1..=total_batches)
            .map(|j| kind.contamination(j, change_batch))
            .collect();
        Self {
            name: kind.name().to_string(),
            schedule,
            change_batch,
            total_batches,
        }
    }

    /// A custom schedule. Validates `p_j in [0, 1]` and `p_j = 0` for
    /// `j <= change_batch`.
    pub fn custom(name: impl Into<String>, schedule: Vec<f64>, change_batch: usize) -> Result<Self> {
        let total_batches = schedule.len();
        if change_batch > total_batches {
            return Err(Error::invalid(format!(
                "change_batch {} exceeds schedule length {}",
                change_batch, total_batches
            )));
        }
        for (i, &p) in schedule.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::invalid(format!(
                    "contamination p_{} = {} outside [0, 1]",
                    i + 1,
                    p
                )));
            }
            if i + 1 <= change_batch && p != 0.0 {
                return Err(Error::invalid(format!(
                    "contamination p_{} = {} before the change batch {}",
                    i + 1,
                    p,
                    change_batch
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            schedule,
            change_batch,
            total_batches,
        })
    }

    /// Load a custom scenario from its JSON file form
    /// `{change_batch, total_batches, schedule}`.
    pub fn from_json<R: Read>(name: impl Into<String>, reader: R) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_reader(reader)?;
        if file.schedule.len() != file.total_batches {
            return Err(Error::invalid(format!(
                "schedule length {} disagrees with total_batches {}",
                file.schedule.len(),
                file.total_batches
            )));
        }
        Self::custom(name, file.schedule, file.change_batch)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let name = path
            .as_ref()
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string());
        Self::from_json(name, std::fs::File::open(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScenarioFile {
            change_batch: self.change_batch,
            total_batches: self.total_batches,
            schedule: self.schedule.clone(),
        })?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Change batch `B`; contamination may appear from batch `B + 1` on.
    pub fn change_batch(&self) -> usize {
        self.change_batch
    }

    pub fn total_batches(&self) -> usize {
        self.total_batches
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    /// Contamination `p_j`; errors when `j` is out of `1..=total_batches`.
    pub fn contamination(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.total_batches {
            return Err(Error::invalid(format!(
                "batch index {} outside 1..={}",
                j, self.total_batches
            )));
        }
        Ok(self.schedule[j - 1])
    }

    /// True when no batch carries contamination (a pure null schedule).
    pub fn is_null(&self) -> bool {
        self.schedule.iter().all(|&p| p == 0.0)
    }
}

/// Beta(alpha, beta) shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha <= 0.0 || beta <= 0.0 || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid(format!(
                "Beta shape parameters must be positive; got ({}, {})",
                alpha, beta
            )));
        }
        Ok(Self { alpha, beta })
    }
}

/// One pooled confidence value with its opaque label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub z: f64,
    pub label: Option<String>,
}

/// Where base and drift confidence values come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfidenceSource {
    /// Synthetic confidences drawn from two Beta distributions.
    BetaSynthetic { base: BetaParams, drift: BetaParams },
    /// Confidences sampled uniformly with replacement from ingested pools.
    Pool {
        base: Vec<PoolEntry>,
        drift: Vec<PoolEntry>,
    },
}

impl ConfidenceSource {
    /// Default synthetic stand-in: confident base predictions Beta(8, 2),
    /// diffuse drift predictions Beta(2, 2).
    pub fn default_beta() -> Self {
        ConfidenceSource::BetaSynthetic {
            base: BetaParams { alpha: 8.0, beta: 2.0 },
            drift: BetaParams { alpha: 2.0, beta: 2.0 },
        }
    }

    /// Preset where drift predictions are incorrectly *more* confident
    /// than base ones: base Beta(8, 2), drift Beta(20, 1).
    pub fn overconfident_beta() -> Self {
        ConfidenceSource::BetaSynthetic {
            base: BetaParams { alpha: 8.0, beta: 2.0 },
            drift: BetaParams { alpha: 20.0, beta: 1.0 },
        }
    }

    pub fn beta(base: BetaParams, drift: BetaParams) -> Self {
        ConfidenceSource::BetaSynthetic { base, drift }
    }

    /// Read pools from the `z,label,pool` CSV format, `pool in {base, drift}`.
    pub fn from_pool_csv<R: Read>(reader: R) -> Result<Self> {
        let (base, drift) = read_pools(reader)?;
        if base.is_empty() {
            return Err(Error::invalid("pool CSV contains no base entries"));
        }
        Ok(ConfidenceSource::Pool { base, drift })
    }

    pub fn from_pool_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pool_csv(std::fs::File::open(path)?)
    }

    fn validate(&self) -> Result<()> {
        match self {
            ConfidenceSource::BetaSynthetic { base, drift } => {
                BetaParams::new(base.alpha, base.beta)?;
                BetaParams::new(drift.alpha, drift.beta)?;
                Ok(())
            }
            ConfidenceSource::Pool { base, .. } => {
                if base.is_empty() {
                    return Err(Error::invalid("base pool is empty"));
                }
                Ok(())
            }
        }
    }
}

/// Parse `z,label,pool` rows into (base, drift) pools, validating each row.
pub fn read_pools<R: Read>(reader: R) -> Result<(Vec<PoolEntry>, Vec<PoolEntry>)> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["z", "label", "pool"] {
        return Err(Error::invalid(format!(
            "pool CSV header must be `z,label,pool`; got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut base = Vec::new();
    let mut drift = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let line = i + 2; // header is line 1
        let z: f64 = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::invalid(format!("line {}: unparsable z", line)))?;
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::invalid(format!(
                "line {}: z = {} outside [0, 1]",
                line, z
            )));
        }
        let label = match record.get(1) {
            None | Some("") => None,
            Some(s) => Some(s.to_string()),
        };
        let entry = PoolEntry { z, label };
        match record.get(2) {
            Some("base") => base.push(entry),
            Some("drift") => drift.push(entry),
            other => {
                return Err(Error::invalid(format!(
                    "line {}: pool must be `base` or `drift`; got {:?}",
                    line, other
                )))
            }
        }
    }
    Ok((base, drift))
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

enum Sampler<'a> {
    Beta(Beta<f64>),
    Pool(&'a [PoolEntry]),
}

impl Sampler<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, Option<String>) {
        match self {
            Sampler::Beta(dist) => (dist.sample(rng).clamp(0.0, 1.0), None),
            Sampler::Pool(entries) => {
                let entry = &entries[rng.gen_range(0..entries.len())];
                (entry.z, entry.label.clone())
            }
        }
    }
}

/// Build a [`ConfidenceStream`] for a scenario: batch `j` gets exactly
/// `round(batch_size * p_j)` drift observations (half-up rounding), the
/// remainder base observations, shuffled within the batch.
///
/// The stream changepoint is `K = B * batch_size`, or absent when the
/// schedule is pure null (no batch can carry drift).
pub fn synthesize_stream(
    scenario: &DriftScenario,
    source: &ConfidenceSource,
    batch_size: usize,
    seed: u64,
) -> Result<ConfidenceStream> {
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    source.validate()?;
    let (base_sampler, drift_sampler) = match source {
        ConfidenceSource::BetaSynthetic { base, drift } => (
            Sampler::Beta(
                Beta::new(base.alpha, base.beta)
                    .map_err(|e| Error::invalid(format!("base Beta: {}", e)))?,
            ),
            Some(Sampler::Beta(
                Beta::new(drift.alpha, drift.beta)
                    .map_err(|e| Error::invalid(format!("drift Beta: {}", e)))?,
            )),
        ),
        ConfidenceSource::Pool { base, drift } => (
            Sampler::Pool(base),
            if drift.is_empty() {
                None
            } else {
                Some(Sampler::Pool(drift))
            },
        ),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::with_capacity(scenario.total_batches() * batch_size);
    for j in 1..=scenario.total_batches() {
        let p = scenario.contamination(j)?;
        let n_drift = round_half_up(batch_size as f64 * p).min(batch_size);
        let mut batch: Vec<(f64, bool, Option<String>)> = Vec::with_capacity(batch_size);
        if n_drift > 0 {
            let sampler = drift_sampler.as_ref().ok_or_else(|| {
                Error::invalid(format!(
                    "batch {} demands drift observations but the drift pool is empty",
                    j
                ))
            })?;
            for _ in 0..n_drift {
                let (z, label) = sampler.draw(&mut rng);
                batch.push((z, true, label));
            }
        }
        for _ in n_drift..batch_size {
            let (z, label) = base_sampler.draw(&mut rng);
            batch.push((z, false, label));
        }
        batch.shuffle(&mut rng);
        let offset = (j - 1) * batch_size;
        for (i, (z, is_drift, label)) in batch.into_iter().enumerate() {
            observations.push(Observation {
                t: offset + i + 1,
                z,
                is_drift,
                label,
            });
        }
    }

    let changepoint = if scenario.is_null() {
        None
    } else {
        Some(scenario.change_batch() * batch_size)
    };
    ConfidenceStream::new(observations, batch_size, changepoint)
}

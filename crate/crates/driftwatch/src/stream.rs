//! Core observation, batching, and indexing types.
//!
//! A [`ConfidenceStream`] is the sole detector input. Ground-truth fields
//! (`is_drift`, `changepoint`) live on the stream for the benchmarking
//! harness but are structurally invisible to detectors: every detector
//! entry point in this crate accepts only a slice of confidence values,
//! obtained via [`ConfidenceStream::confidences`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of observations per batch.
pub const DEFAULT_BATCH_SIZE: usize = 20;

/// One observed model prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// 1-based index in the stream.
    pub t: usize,
    /// Model confidence in `[0, 1]`.
    pub z: f64,
    /// Ground truth: whether this observation came from the drift class.
    /// Known to the harness, never to the detector.
    pub is_drift: bool,
    /// Optional opaque label (class label or instance id).
    pub label: Option<String>,
}

/// 1-based batch index; batch `j` covers observation indices
/// `batch_size*(j-1)+1 ..= batch_size*j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BatchIndex(pub usize);

impl BatchIndex {
    pub fn get(self) -> usize {
        self.0
    }
}

/// Batch index of observation index `t`: `ceil(t / batch_size)`.
pub fn batch_of(t: usize, batch_size: usize) -> Result<BatchIndex> {
    if t == 0 {
        return Err(Error::invalid("observation index t must be >= 1"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    Ok(BatchIndex(t.div_ceil(batch_size)))
}

/// An ordered sequence of observations with known batch structure.
///
/// Immutable after construction; safe to share across concurrent readers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceStream {
    observations: Vec<Observation>,
    batch_size: usize,
    changepoint: Option<usize>,
}

impl ConfidenceStream {
    /// Build a stream, validating the invariants: indices are contiguous
    /// `1..=n`, every `z` lies in `[0, 1]`, and no observation at or before
    /// the changepoint carries the drift flag.
    pub fn new(
        observations: Vec<Observation>,
        batch_size: usize,
        changepoint: Option<usize>,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        for (i, obs) in observations.iter().enumerate() {
            if obs.t != i + 1 {
                return Err(Error::invalid(format!(
                    "observation indices must be contiguous from 1: position {} has t={}",
                    i, obs.t
                )));
            }
            if !(0.0..=1.0).contains(&obs.z) || !obs.z.is_finite() {
                return Err(Error::invalid(format!(
                    "confidence z must lie in [0, 1]; got {} at t={}",
                    obs.z, obs.t
                )));
            }
        }
        if let Some(k) = changepoint {
            if k == 0 {
                return Err(Error::invalid("changepoint must be >= 1"));
            }
            if let Some(bad) = observations.iter().find(|o| o.t <= k && o.is_drift) {
                return Err(Error::invalid(format!(
                    "observation t={} is flagged as drift but precedes the changepoint K={}",
                    bad.t, k
                )));
            }
        }
        Ok(Self {
            observations,
            batch_size,
            changepoint,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Ground-truth changepoint `K`, if any. Harness-side only.
    pub fn changepoint(&self) -> Option<usize> {
        self.changepoint
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn observation(&self, t: usize) -> Option<&Observation> {
        self.observations.get(t.checked_sub(1)?)
    }

    /// The detector-visible view: confidence values only.
    pub fn confidences(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.z).collect()
    }

    /// Number of complete batches in the stream.
    pub fn num_batches(&self) -> usize {
        self.observations.len() / self.batch_size
    }

    /// Observations of batch `j`, i.e. indices
    /// `batch_size*(j-1)+1 ..= batch_size*j`.
    ///
    /// A partial or missing batch is an error identifying the first missing
    /// observation index.
    pub fn batch_slice(&self, j: BatchIndex) -> Result<&[Observation]> {
        if j.get() == 0 {
            return Err(Error::invalid("batch index must be >= 1"));
        }
        let start = self.batch_size * (j.get() - 1); // 0-based
        let end = self.batch_size * j.get();
        if end > self.observations.len() {
            return Err(Error::IncompleteBatch {
                batch: j.get(),
                first_missing: self.observations.len() + 1,
            });
        }
        Ok(&self.observations[start..end])
    }

    /// Write the stream in the `t,z,is_drift,label` CSV format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "z", "is_drift", "label"])?;
        for obs in &self.observations {
            w.write_record([
                obs.t.to_string(),
                format!("{}", obs.z),
                if obs.is_drift { "1" } else { "0" }.to_string(),
                obs.label.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read a stream from the `t,z,is_drift,label` CSV format.
    ///
    /// The changepoint is not part of the wire format; pass it separately
    /// when the ground truth is known.
    pub fn read_csv<R: Read>(
        reader: R,
        batch_size: usize,
        changepoint: Option<usize>,
    ) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = ["t", "z", "is_drift", "label"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::invalid(format!(
                "stream CSV header must be `t,z,is_drift,label`; got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut observations = Vec::new();
        for record in r.records() {
            let record = record?;
            let t: usize = record
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::invalid("unparsable t column"))?;
            let z: f64 = record
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::invalid("unparsable z column"))?;
            let is_drift = match record.get(2) {
                Some("0") => false,
                Some("1") => true,
                other => {
                    return Err(Error::invalid(format!(
                        "is_drift must be 0 or 1; got {:?}",
                        other
                    )))
                }
            };
            let label = match record.get(3) {
                None | Some("") => None,
                Some(s) => Some(s.to_string()),
            };
            observations.push(Observation {
                t,
                z,
                is_drift,
                label,
            });
        }
        Self::new(observations, batch_size, changepoint)
    }

    pub fn read_csv_path(
        path: impl AsRef<Path>,
        batch_size: usize,
        changepoint: Option<usize>,
    ) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, batch_size, changepoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_of(n: usize, batch_size: usize) -> ConfidenceStream {
        let obs = (1..=n)
            .map(|t| Observation {
                t,
                z: (t % 7) as f64 / 10.0,
                is_drift: false,
                label: None,
            })
            .collect();
        ConfidenceStream::new(obs, batch_size, None).unwrap()
    }

    #[test]
    fn batch_of_matches_ceiling_division() {
        assert_eq!(batch_of(1, 20).unwrap().get(), 1);
        assert_eq!(batch_of(20, 20).unwrap().get(), 1);
        assert_eq!(batch_of(21, 20).unwrap().get(), 2);
        assert_eq!(batch_of(1000, 20).unwrap().get(), 50);
        assert_eq!(batch_of(1001, 20).unwrap().get(), 51);
    }

    #[test]
    fn batch_of_rejects_zero_arguments() {
        assert!(batch_of(0, 20).is_err());
        assert!(batch_of(5, 0).is_err());
    }

    #[test]
    fn batch_boundaries_share_a_batch() {
        for j in 1..=10usize {
            for size in [1, 3, 20] {
                let first = size * (j - 1) + 1;
                let last = size * j;
                assert_eq!(batch_of(first, size).unwrap().get(), j);
                assert_eq!(batch_of(last, size).unwrap().get(), j);
            }
        }
    }

    #[test]
    fn batch_slice_returns_expected_indices() {
        let s = stream_of(2000, 20);
        let b1 = s.batch_slice(BatchIndex(1)).unwrap();
        assert_eq!(b1.first().unwrap().t, 1);
        assert_eq!(b1.last().unwrap().t, 20);
        let b51 = s.batch_slice(BatchIndex(51)).unwrap();
        assert_eq!(b51.first().unwrap().t, 1001);
        assert_eq!(b51.last().unwrap().t, 1020);
    }

    #[test]
    fn batch_slice_rejects_incomplete_batch() {
        let s = stream_of(30, 20);
        match s.batch_slice(BatchIndex(2)) {
            Err(Error::IncompleteBatch {
                batch,
                first_missing,
            }) => {
                assert_eq!(batch, 2);
                assert_eq!(first_missing, 31);
            }
            other => panic!("expected IncompleteBatch, got {:?}", other),
        }
    }

    #[test]
    fn concatenated_batches_reconstruct_the_stream() {
        let s = stream_of(120, 20);
        let mut rebuilt = Vec::new();
        for j in 1..=s.num_batches() {
            rebuilt.extend_from_slice(s.batch_slice(BatchIndex(j)).unwrap());
        }
        assert_eq!(rebuilt, s.observations());
    }

    #[test]
    fn constructor_rejects_drift_before_changepoint() {
        let obs = vec![
            Observation {
                t: 1,
                z: 0.5,
                is_drift: true,
                label: None,
            },
            Observation {
                t: 2,
                z: 0.5,
                is_drift: false,
                label: None,
            },
        ];
        assert!(ConfidenceStream::new(obs, 2, Some(1)).is_err());
    }

    #[test]
    fn constructor_rejects_out_of_range_confidence() {
        let obs = vec![Observation {
            t: 1,
            z: 1.5,
            is_drift: false,
            label: None,
        }];
        assert!(ConfidenceStream::new(obs, 2, None).is_err());
    }

    #[test]
    fn csv_roundtrip_preserves_observations() {
        let obs = vec![
            Observation {
                t: 1,
                z: 0.25,
                is_drift: false,
                label: Some("a".into()),
            },
            Observation {
                t: 2,
                z: 0.75,
                is_drift: true,
                label: None,
            },
        ];
        let s = ConfidenceStream::new(obs, 2, None).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ConfidenceStream::read_csv(buf.as_slice(), 2, None).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let data = "time,conf,drift,label\n1,0.5,0,\n";
        assert!(ConfidenceStream::read_csv(data.as_bytes(), 2, None).is_err());
    }
}

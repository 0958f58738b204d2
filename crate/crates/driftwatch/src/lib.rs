//! Streaming drift detection for model-confidence sequences.
//!
//! A deployed model emits a confidence value `z in [0, 1]` per prediction.
//! Drift in the deployment data usually shows up as a change in the
//! distribution of those confidences, which this crate detects with a
//! sequential change point model: every incoming observation extends the
//! stream, every candidate before/after split is scored with a two-sample
//! statistic, and the maximum normalized statistic is compared against a
//! critical value `h_t` that grows over time. The `h_t` sequence is
//! calibrated by simulation so the false-alarm probability stays at the
//! configured level no matter how long the stream runs — unlike naive
//! repeated testing, whose false-alarm rate balloons with every peek
//! (see [`eval::peeking_simulation`]).
//!
//! After a detection, a local kernel-density two-sample test compares the
//! estimated pre- and post-change confidence densities and extracts the
//! regions where the post-change density is significantly higher; the
//! post-change observations falling in those regions are reported as the
//! most anomalous instances for diagnosis.
//!
//! The crate also ships a benchmarking harness: drift scenarios with
//! per-batch contamination schedules, synthetic confidence sources, naive
//! baselines, a compounding loss that trades false alarms against
//! detection delay, and aggregation across seeded repetitions. The
//! `driftwatch` binary exposes it all behind `calibrate`, `run`, `peek`,
//! `losscurve`, and `ingest-check` subcommands; the `examples/` directory
//! holds one runnable walkthrough per capability.
//!
//! ```
//! use driftwatch::moments::MonteCarloMoments;
//! use driftwatch::stats::{StatisticKind, TwoSampleStatistic};
//! use driftwatch::threshold::{calibrate_thresholds, AlphaMode, CalibrationConfig};
//! use driftwatch::detector::CpmState;
//!
//! let moments = MonteCarloMoments::new(7).with_replicates(300).with_grid(2, 5);
//! let table = calibrate_thresholds(
//!     &CalibrationConfig {
//!         statistic_kind: StatisticKind::CramerVonMises,
//!         alpha_mode: AlphaMode::HorizonTotal,
//!         alpha: 0.05,
//!         t0: 20,
//!         horizon: 60,
//!         evaluation_stride: 10,
//!         candidate_stride: 5,
//!         num_streams: 300,
//!         seed: 7,
//!     },
//!     &moments,
//! )?;
//!
//! let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
//! let mut cpm = CpmState::for_confidences(stat, &table, &moments);
//! let calm = vec![0.9; 0]; // observations arrive one at a time
//! # let _ = calm;
//! for t in 1..=60 {
//!     let z = if t <= 40 { 0.85 + 0.01 * (t % 7) as f64 } else { 0.15 + 0.01 * (t % 5) as f64 };
//!     if cpm.step(z)? == driftwatch::detector::CpmStatus::Detected {
//!         break;
//!     }
//! }
//! let outcome = cpm.detection();
//! assert!(outcome.is_detection());
//! assert!(outcome.d.unwrap() > 40);
//! # Ok::<(), driftwatch::Error>(())
//! ```

pub mod detector;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod harness;
pub mod kde;
pub mod moments;
pub mod scenario;
pub mod seed;
pub mod stats;
pub mod stream;
pub mod threshold;

pub use error::{Error, Result};

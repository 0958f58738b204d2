//! Calibrate critical-value tables and inspect their structure: thresholds
//! grow with t, and a stricter alpha sits above a looser one everywhere.
//! The table round-trips through its JSON cache format.
//!
//! ```bash
//! cargo run --release --example calibrate_thresholds
//! ```

use driftwatch::moments::MonteCarloMoments;
use driftwatch::stats::StatisticKind;
use driftwatch::threshold::{calibrate_thresholds, AlphaMode, CalibrationConfig, ThresholdTable};

fn main() -> driftwatch::Result<()> {
    let moments = MonteCarloMoments::new(17)
        .with_replicates(2000)
        .with_grid(2, 10);
    let config = |alpha: f64| CalibrationConfig {
        statistic_kind: StatisticKind::CramerVonMises,
        alpha_mode: AlphaMode::PerEvaluationHazard,
        alpha,
        t0: 25,
        horizon: 305,
        evaluation_stride: 20,
        candidate_stride: 10,
        num_streams: 3000,
        seed: 17,
    };

    println!("calibrating h_t for alpha = 0.05 and 0.01 (3000 null streams each)...");
    let loose = calibrate_thresholds(&config(0.05), &moments)?;
    let strict = calibrate_thresholds(&config(0.01), &moments)?;

    println!("{:>6} {:>12} {:>12}", "t", "h_t (0.05)", "h_t (0.01)");
    for (&(t, h05), &(_, h01)) in loose.values().iter().zip(strict.values()) {
        println!("{:>6} {:>12.4} {:>12.4}", t, h05, h01);
    }

    let json = loose.to_json_string()?;
    let reloaded = ThresholdTable::read_json(json.as_bytes())?;
    assert_eq!(reloaded, loose);
    println!("\ncache round-trip ok ({} bytes of JSON)", json.len());
    Ok(())
}

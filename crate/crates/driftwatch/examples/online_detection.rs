//! Feed a confidence stream with a mid-stream drift injection through the
//! online detector, one observation at a time, and score the result.
//!
//! ```bash
//! cargo run --release --example online_detection
//! ```

use driftwatch::detector::{CpmState, CpmStatus};
use driftwatch::eval::{loss, LossParams};
use driftwatch::moments::MonteCarloMoments;
use driftwatch::scenario::{synthesize_stream, ConfidenceSource, DriftScenario, ScenarioKind};
use driftwatch::stats::{StatisticKind, TwoSampleStatistic};
use driftwatch::stream::batch_of;
use driftwatch::threshold::{calibrate_thresholds, AlphaMode, CalibrationConfig};

fn main() -> driftwatch::Result<()> {
    let batch_size = 10;
    // Change at batch 20 (K = 200), 60 batches total.
    let scenario = DriftScenario::named(ScenarioKind::SuddenHalf, 20, 60);
    let stream = synthesize_stream(&scenario, &ConfidenceSource::default_beta(), batch_size, 4242)?;
    println!(
        "stream: {} observations, changepoint K = {:?} (hidden from the detector)",
        stream.len(),
        stream.changepoint()
    );

    let moments = MonteCarloMoments::new(9)
        .with_replicates(2000)
        .with_grid(2, batch_size);
    let table = calibrate_thresholds(
        &CalibrationConfig {
            statistic_kind: StatisticKind::CramerVonMises,
            alpha_mode: AlphaMode::HorizonTotal,
            alpha: 0.05,
            t0: 25,
            horizon: stream.len(),
            evaluation_stride: batch_size,
            candidate_stride: batch_size,
            num_streams: 3000,
            seed: 9,
        },
        &moments,
    )?;

    let stat = TwoSampleStatistic::new(StatisticKind::CramerVonMises);
    let mut cpm = CpmState::for_confidences(stat, &table, &moments);
    for &z in &stream.confidences() {
        if cpm.step(z)? == CpmStatus::Detected {
            break;
        }
    }

    let outcome = cpm.detection();
    match outcome.d {
        Some(d) => {
            let k_hat = outcome.k_hat.unwrap();
            println!(
                "detected at t = {} (batch {}), estimated changepoint {} (batch {}), W = {:.2}",
                d,
                batch_of(d, batch_size)?.get(),
                k_hat,
                batch_of(k_hat, batch_size)?.get(),
                outcome.w_max.unwrap()
            );
        }
        None => println!("no detection before the stream ended"),
    }

    let score = loss(
        stream.changepoint(),
        outcome.d,
        scenario.schedule(),
        batch_size,
        &LossParams::default(),
    )?;
    println!("loss score: {:.2} (0 = detected in the first post-change batch)", score);
    Ok(())
}

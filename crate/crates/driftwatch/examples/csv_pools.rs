//! File formats: write and re-read a stream in the `t,z,is_drift,label`
//! CSV format, and build streams from an ingested confidence pool
//! (`z,label,pool`) instead of synthetic Beta draws.
//!
//! ```bash
//! cargo run --release --example csv_pools
//! ```

use driftwatch::scenario::{synthesize_stream, ConfidenceSource, DriftScenario, ScenarioKind};
use driftwatch::stream::ConfidenceStream;

fn main() -> driftwatch::Result<()> {
    // A small stream out of the default Beta source.
    let scenario = DriftScenario::named(ScenarioKind::SuddenHalf, 4, 8);
    let stream = synthesize_stream(&scenario, &ConfidenceSource::default_beta(), 5, 99)?;

    let mut csv_bytes = Vec::new();
    stream.write_csv(&mut csv_bytes)?;
    println!("stream CSV ({} observations):", stream.len());
    for line in String::from_utf8_lossy(&csv_bytes).lines().take(6) {
        println!("  {}", line);
    }
    println!("  ...");
    let reread = ConfidenceStream::read_csv(csv_bytes.as_slice(), 5, stream.changepoint())?;
    assert_eq!(reread, stream);
    println!("round-trip ok\n");

    // Pools: confidences harvested from a deployed model, labeled by origin.
    let pool_csv = "\
z,label,pool
0.97,digit-6,base
0.97,digit-1,base
0.88,digit-4,base
0.93,digit-2,base
0.82,digit-8,base
0.99,digit-0,drift
0.98,digit-0,drift
0.96,digit-0,drift
";
    let source = ConfidenceSource::from_pool_csv(pool_csv.as_bytes())?;
    let pooled = synthesize_stream(&scenario, &source, 5, 100)?;
    println!("pool-backed stream, first post-change batch:");
    for obs in pooled.batch_slice(driftwatch::stream::BatchIndex(5))? {
        println!(
            "  t={:>2} z={:.2} label={}",
            obs.t,
            obs.z,
            obs.label.as_deref().unwrap_or("-")
        );
    }
    Ok(())
}

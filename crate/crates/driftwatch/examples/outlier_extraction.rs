//! Local kernel-density two-sample test: find the regions of [0, 1] where
//! a post-change confidence density significantly exceeds the pre-change
//! one, then pick the most anomalous observations out of the post-change
//! window.
//!
//! ```bash
//! cargo run --release --example outlier_extraction
//! ```

use driftwatch::kde::kde_fit;
use driftwatch::local_test::{extract_regions, local_density_test, select_outliers};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

fn main() -> driftwatch::Result<()> {
    // Pre-change: narrow confidences around 0.55. Post-change: wider.
    let narrow = Beta::new(24.0, 20.0).unwrap();
    let wide = Beta::new(10.0, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(910);
    let pre: Vec<f64> = (0..5000).map(|_| narrow.sample(&mut rng)).collect();
    let post: Vec<f64> = (0..5000).map(|_| wide.sample(&mut rng)).collect();

    let f0 = kde_fit(&pre)?;
    let f1 = kde_fit(&post)?;
    println!(
        "bandwidths: pre {:.4}, post {:.4} (Silverman)",
        f0.bandwidth(),
        f1.bandwidth()
    );

    let result = local_density_test(&f0, &f1, 401, 0.05)?;
    let regions = extract_regions(&result);
    println!("significant f1 > f0 regions (alpha* = 0.05):");
    for region in &regions.regions {
        println!(
            "  [{:.3}, {:.3}]  p = {:.2e}  ({} grid points)",
            region.lo, region.hi, region.p_value, region.n_points
        );
    }
    println!("region report JSON:\n{}", regions.to_json_string()?);

    // Treat the first 60 post-change draws as the detection window.
    let window: Vec<(usize, f64)> = post
        .iter()
        .take(60)
        .enumerate()
        .map(|(i, &z)| (5001 + i, z))
        .collect();
    let selection = select_outliers(&regions, &window, 10);
    println!(
        "selected {} outliers (cap 10), most significant region first:",
        selection.theta_indices.len()
    );
    for &t in &selection.theta_indices {
        let z = window.iter().find(|&&(tt, _)| tt == t).unwrap().1;
        println!("  t = {:>5}  z = {:.4}", t, z);
    }
    Ok(())
}

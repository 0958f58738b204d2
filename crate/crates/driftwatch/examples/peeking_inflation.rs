//! Why naive repeated testing needs correction: test a growing prefix of
//! an unchanged stream at level alpha and the chance of at least one false
//! rejection is several times alpha.
//!
//! ```bash
//! cargo run --release --example peeking_inflation
//! ```

use driftwatch::eval::peeking_simulation;

fn main() -> driftwatch::Result<()> {
    let sims = 10_000;
    println!("repeated z-tests on prefixes x_1..x_t, t = 20..=100, {} simulations", sims);
    println!("{:>8} {:>12} {:>8}", "alpha", "Pr(V >= 1)", "E(V)");
    for alpha in [0.05, 0.01, 0.005, 0.001] {
        let summary = peeking_simulation(alpha, 100, 20, sims, 7)?;
        println!(
            "{:>8} {:>12.4} {:>8.4}",
            alpha, summary.pr_v_ge_1, summary.e_v
        );
    }
    println!();
    println!("At alpha = 0.05 the false-alarm probability of the whole procedure");
    println!("is around 23%, not 5% — the sequential detector exists to fix this.");
    Ok(())
}

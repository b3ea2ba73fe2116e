//! Measures how much flipping one early token moves a random causal
//! transformer's final output as the sequence grows.
//!
//! ```text
//! cargo run --release --example perturbation_probe
//! ```

use regpomdp::analysis::perturbation_probe;
use regpomdp::seqmodels::GptConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lengths = [16, 32, 64, 128, 256, 512];
    let cfg = GptConfig {
        hidden: 64,
        heads: 2,
        layers: 2,
        max_positions: 512,
    };
    let report = perturbation_probe(&cfg, 64, &lengths, 64, 0)?;
    println!("token embedding distance D = {:.3}", report.embedding_distance);
    println!("{:>5} {:>12} {:>12} {:>12}", "n", "max", "mean", "n * max / D");
    for r in &report.rows {
        println!(
            "{:>5} {:>12.4e} {:>12.4e} {:>12.4}",
            r.n,
            r.max_delta,
            r.mean_delta,
            r.n as f64 * r.max_delta / report.embedding_distance
        );
    }
    println!("log-log slope {:.3}", report.slope);
    Ok(())
}

//! Runs the LRU's diagonal recurrence sequentially and as a parallel prefix
//! scan, and the linear-attention layer in parallel and recurrent form, and
//! reports how far the two forms drift apart.

use std::time::Instant;

use regpomdp::rng::seeded;
use regpomdp::seqmodels::{linear_attention_dual_check, lru_init, lru_recurrence, ScanMode};
use regpomdp::tensor::{Tape, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded(1);
    let (batch, len, units) = (4, 256, 32);
    let init = lru_init(&mut rng, units, 0.9, 0.999, std::f64::consts::PI)?;
    let lambda: Vec<f64> = init
        .nu
        .iter()
        .zip(&init.theta)
        .flat_map(|(nu, th)| {
            let r = (-nu.exp()).exp();
            [r * th.cos(), r * th.sin()]
        })
        .collect();

    let tape = Tape::new();
    let lam = tape.constant(Tensor::from_vec(lambda));
    let u = tape.constant(Tensor::randn(&[batch, len, 2 * units], 1.0, &mut rng));
    let x0 = tape.constant(Tensor::zeros(&[batch, 2 * units]));
    let t = Instant::now();
    let seq = lru_recurrence(lam, u, x0, ScanMode::Sequential)?;
    let t_seq = t.elapsed();
    let t = Instant::now();
    let scan = lru_recurrence(lam, u, x0, ScanMode::Scan)?;
    let t_scan = t.elapsed();
    println!(
        "LRU length {}: max |sequential - scan| = {:.3e} ({:?} vs {:?})",
        len,
        seq.value().max_abs_diff(&scan.value()),
        t_seq,
        t_scan
    );

    let check = linear_attention_dual_check(&mut rng, 128, 16);
    println!("linear attention length 128: max |parallel - recurrent| = {:.3e}", check.max_diff);
    Ok(())
}

//! Check the exact BPTT gradients against central finite differences on a
//! small cell, parameter array by parameter array.
//!
//!     cargo run --release --example gradient_check

use mg_lstm::{bptt, sequence_loss, CounterRng, LstmParams, LstmState};

fn main() -> mg_lstm::Result<()> {
    let n = 3;
    let t_len = 5;
    let mut rng = CounterRng::new(17);
    let mut params = LstmParams::zeros(n);
    for (_, a) in params.arrays_mut() {
        for v in a {
            *v = rng.uniform(-0.7, 0.7);
        }
    }
    let inputs: Vec<f64> = (0..t_len).map(|_| rng.uniform(-0.5, 0.5)).collect();
    let targets: Vec<f64> = (0..t_len).map(|_| rng.uniform(-0.5, 0.5)).collect();
    let state0 = LstmState::zeros(n);

    let (loss, grads) = bptt(&params, &state0, &inputs, &targets)?;
    println!("sequence loss: {loss:.6}");
    println!("{:<6} {:>12} {:>14}", "array", "entries", "max rel err");

    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for (idx, (name, g_arr)) in grads.arrays().iter().enumerate() {
        let mut max_rel: f64 = 0.0;
        for k in 0..g_arr.len() {
            let probe = |delta: f64| -> f64 {
                let mut p = params.clone();
                p.arrays_mut()[idx].1[k] += delta;
                sequence_loss(&p, &state0, &inputs, &targets).expect("aligned")
            };
            let numeric = (probe(eps) - probe(-eps)) / (2.0 * eps);
            let analytic = g_arr[k];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            max_rel = max_rel.max((numeric - analytic).abs() / denom);
        }
        println!("{name:<6} {:>12} {max_rel:>14.3e}", g_arr.len());
        worst = worst.max(max_rel);
    }
    println!("\nworst relative disagreement: {worst:.3e}");
    assert!(worst < 1e-5, "gradient check failed");
    println!("all arrays agree with finite differences to < 1e-5");
    Ok(())
}

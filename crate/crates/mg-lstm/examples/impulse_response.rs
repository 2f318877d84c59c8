//! Kick the model with a periodic input impulse and measure how the error
//! decays back to its baseline: the ensemble profile e_n and the
//! relaxation timescale lambda.
//!
//!     cargo run --release --example impulse_response

use mg_lstm::diagnostics::{impulse_experiment, ImpulseConfig};
use mg_lstm::{add_noise, integrate_mg, train, MgConfig, TrainConfig};

fn main() -> mg_lstm::Result<()> {
    let traj = integrate_mg(&MgConfig {
        t_end: 9000.0,
        ..MgConfig::default()
    })?;
    let train_window = traj.window(0, 5000);
    let eval_window = traj.window(5000, 3000);

    let sigma = 0.16;
    println!("training a small model at sigma = {sigma}...");
    let data = add_noise(&train_window, sigma, 13);
    let config = TrainConfig {
        n_cells: 16,
        seq_len: 50,
        n_epochs: 80,
        batch_size: 8,
        seed: 19,
        ..TrainConfig::default()
    };
    let model = train(&data, &config)?.model;

    let impulse = ImpulseConfig {
        period: 100,
        magnitude: 1.0,
        n_ensembles: 28,
    };
    let result = impulse_experiment(&model, &eval_window, &impulse)?;

    println!("\nimpulse height 1.0 in normalized units, every {} steps,", impulse.period);
    println!("averaged over {} windows:", result.n_ensembles);
    println!("  baseline e_mu          : {:.4}", result.e_mu_baseline);
    println!("  initial deviation e_0  : {:.4}", result.e_0);
    println!("  e_0 / impulse height   : {:.3}", result.e_0_impulse_units);
    println!("  relaxation lambda      : {:.2} samples", result.lambda);

    println!("\nerror profile after the impulse (every 2nd offset):");
    for (n, e) in result.e_n.iter().take(24).enumerate().step_by(2) {
        let bar_len = (60.0 * e / result.e_0).round() as usize;
        println!("  n={n:<3} e={e:<8.4} {}", "#".repeat(bar_len.max(1)));
    }
    println!("  ... relaxes to e_mu = {:.4}", result.e_mu_baseline);
    Ok(())
}

//! Train a small model on heavily noisy observations and watch it beat the
//! zeroth-order baseline on data it has never seen: the de-noising is not
//! supervised, the targets during training are the noisy samples
//! themselves.
//!
//!     cargo run --release --example train_denoiser

use mg_lstm::diagnostics::{sequential_predict, zeroth_order_nrmse, CaptureOpts};
use mg_lstm::{add_noise, integrate_mg, train, MgConfig, TrainConfig};

fn main() -> mg_lstm::Result<()> {
    let sigma = 0.32;
    let traj = integrate_mg(&MgConfig {
        t_end: 9000.0,
        ..MgConfig::default()
    })?;
    let train_window = traj.window(0, 6000);
    let eval_window = traj.window(6000, 2000);

    println!("training on {} noisy samples at sigma = {sigma}", train_window.len());
    let data = add_noise(&train_window, sigma, 11);
    let config = TrainConfig {
        n_cells: 16,
        seq_len: 50,
        n_epochs: 60,
        batch_size: 8,
        seed: 5,
        ..TrainConfig::default()
    };
    let outcome = train(&data, &config)?;
    let head: f64 = outcome.log[..10].iter().map(|r| r.loss).sum::<f64>() / 10.0;
    let tail: f64 =
        outcome.log[outcome.log.len() - 10..].iter().map(|r| r.loss).sum::<f64>() / 10.0;
    println!(
        "{} gradient steps, batch loss {head:.3} -> {tail:.3}",
        outcome.log.len()
    );

    let warmup = 50;
    let eval_noisy = add_noise(&eval_window, sigma, 23);
    let run = sequential_predict(
        &outcome.model,
        &eval_noisy.values,
        &eval_window.values,
        CaptureOpts::none(),
    );
    let e_model = run.nrmse_vs_truth(eval_window.nu, warmup);
    let e_zeroth = zeroth_order_nrmse(&eval_window, sigma, 29, warmup);
    println!("\nheld-out evaluation at sigma = {sigma}:");
    println!("  zeroth-order baseline e_mu : {e_zeroth:.4}");
    println!("  trained model e_mu         : {e_model:.4}");
    println!("  improvement                : {:.1}x", e_zeroth / e_model);

    println!("\nsample of predictions vs truth vs noisy input:");
    println!("{:>8} {:>9} {:>9} {:>9}", "t", "truth", "noisy", "pred");
    for i in (200..220).step_by(2) {
        println!(
            "{:>8.1} {:>9.4} {:>9.4} {:>9.4}",
            eval_window.times[i + 1],
            eval_window.values[i + 1],
            eval_noisy.values[i + 1],
            run.preds[i]
        );
    }
    Ok(())
}

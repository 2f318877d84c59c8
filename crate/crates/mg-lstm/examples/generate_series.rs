//! Integrate the Mackey-Glass equation, inject observation noise, and show
//! what the dataset export looks like.
//!
//!     cargo run --release --example generate_series

use mg_lstm::{add_noise, integrate_mg, write_series_csv, MgConfig};

fn main() -> mg_lstm::Result<()> {
    let config = MgConfig {
        t_end: 2000.0,
        ..MgConfig::default()
    };
    let traj = integrate_mg(&config)?;

    let min = traj.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = traj.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("retained samples : {}", traj.len());
    println!("value range      : [{min:.4}, {max:.4}]");
    println!("signal scale nu  : {:.4}", traj.nu);

    println!("\nnoise levels (y_n = mu_n + nu * sigma * eps_n):");
    for sigma in [0.0, 0.02, 0.16, 0.64] {
        let noisy = add_noise(&traj, sigma, 7);
        let rms = (noisy
            .values
            .iter()
            .zip(&traj.values)
            .map(|(y, mu)| (y - mu) * (y - mu))
            .sum::<f64>()
            / traj.len() as f64)
            .sqrt();
        println!("  sigma {sigma:<5} -> observation rms deviation {rms:.4}");
    }

    let noisy = add_noise(&traj, 0.64, 7);
    let mut buf = Vec::new();
    write_series_csv(
        &mut buf,
        &traj,
        Some(&noisy),
        &config.comment_lines(),
    )
    .expect("write to memory");
    let text = String::from_utf8(buf).expect("utf8");
    println!("\nfirst rows of the t,mu,y export at sigma = 0.64:");
    for line in text.lines().take(14) {
        println!("  {line}");
    }
    Ok(())
}

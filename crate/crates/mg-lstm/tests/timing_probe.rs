use mg_lstm::diagnostics::{
    contribution_alpha, impulse_experiment, sequential_predict, zeroth_order_nrmse, CaptureOpts,
    ImpulseConfig,
};
use mg_lstm::{
    add_noise, derive_seed, integrate_mg, sigma_tag, train, MgConfig, TrainConfig,
};

#[test]
fn probe() {
    let traj = integrate_mg(&MgConfig {
        t_end: 31000.0,
        ..MgConfig::default()
    })
    .unwrap();
    let eval = traj.window(20000, 10000);
    let seed = 42u64;
    eprintln!(
        "zeroth[0.02]={:.4} zeroth[0.64]={:.4}",
        zeroth_order_nrmse(&eval, 0.02, 7, 100),
        zeroth_order_nrmse(&eval, 0.64, 8, 100)
    );

    let candidates = [
        ("lr1e-2/ep500", 1e-2, 500usize),
        ("lr3e-3/ep800", 3e-3, 800usize),
    ];
    let icfg = ImpulseConfig {
        period: 150,
        magnitude: 1.0,
        n_ensembles: 64,
    };

    for (tag_name, lr, epochs) in candidates {
        eprintln!("--- candidate {tag_name} ---");
        for sigma in [0.0, 0.02, 0.04, 0.64] {
            let noisy = add_noise(
                &traj.window(0, 20000),
                sigma,
                derive_seed(seed, "generate-noise", sigma_tag(sigma)),
            );
            let cfg = TrainConfig {
                n_cells: 32,
                seq_len: 100,
                n_epochs: epochs,
                batch_size: 16,
                learning_rate: lr,
                seed: derive_seed(seed, "train", sigma_tag(sigma)),
                ..TrainConfig::default()
            };
            let t0 = std::time::Instant::now();
            let out = train(&noisy, &cfg).unwrap();
            let wall = t0.elapsed().as_secs_f64();

            // loss smoothing blocks
            let blocks: Vec<f64> = out
                .log
                .chunks(100)
                .filter(|c| c.len() == 100)
                .map(|c| c.iter().map(|r| r.loss).sum::<f64>() / c.len() as f64)
                .collect();
            let viol = blocks
                .windows(2)
                .filter(|w| w[1] > w[0] * 1.10)
                .count();
            let model = out.model;

            let mut line = format!(
                "s={sigma:<5} {wall:>4.0}s loss {:.4} blk_viol {viol} |",
                blocks.last().unwrap()
            );
            for &es in &[0.0, 0.02, 0.64] {
                let ns = derive_seed(seed, "probe-eval", sigma_tag(es));
                let ne = add_noise(&eval, es, ns);
                let run = sequential_predict(&model, &ne.values, &eval.values, CaptureOpts::none());
                line += &format!(" e[{es}]={:.4}", run.nrmse_vs_truth(eval.nu, 100));
            }
            let tr = sequential_predict(&model, &eval.values, &eval.values, CaptureOpts::traces());
            let a = contribution_alpha(&tr).unwrap();
            line += &format!(" | a={:.4}", a.alpha);
            match impulse_experiment(&model, &eval, &icfg) {
                Ok(r) => line += &format!(" | e0={:.3} lam={:.2}", r.e_0, r.lambda),
                Err(e) => line += &format!(" | impulse: {e}"),
            }
            eprintln!("{line}");
        }
    }
}

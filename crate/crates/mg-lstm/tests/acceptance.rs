//! Acceptance suite.
//!
//! Part 1 (fast, no training): gradient correctness against central finite
//! differences, the cell against an independent scalar reference, DDE
//! self-convergence, the contribution-ratio brute-force case, the
//! relaxation-timescale closed form, and the zeroth-order NRMSE brackets
//! on generated data.
//!
//! Part 2 (desk-scale trends): the full desk pipeline runs once into a
//! temp directory (seven models, N = 32); the criteria check orderings and
//! brackets in the emitted result tables, not the paper-scale magnitudes.
//!
//! Each criterion prints one `ACCEPT <id> ... PASS/FAIL` line; run with
//! `--nocapture` to see them all.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use mg_lstm::experiment::ExperimentConfig;
use mg_lstm::{
    bptt, contribution_alpha, integrate_mg, relaxation_timescale, sequence_loss,
    zeroth_order_nrmse, CounterRng, LstmParams, LstmState, MgConfig, PredictionRun, StepTrace,
    SAMPLE_SPACING,
};

fn criterion(id: &str, name: &str, pass: bool, detail: String) {
    println!(
        "ACCEPT {id} {name:<28} {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} {name}: {detail}");
}

fn random_params(n: usize, seed: u64) -> LstmParams {
    let mut rng = CounterRng::new(seed);
    let mut p = LstmParams::zeros(n);
    for (_, a) in p.arrays_mut() {
        for v in a {
            *v = rng.uniform(-0.7, 0.7);
        }
    }
    p
}

// ---------------------------------------------------------------------
// Property suite: no training involved.
// ---------------------------------------------------------------------

/// Criterion 1: BPTT vs central finite differences for N in {1,2,3},
/// T in {1,3,5}, 5 seeds; max relative error < 1e-5 with a 1e-8 absolute
/// floor over every parameter entry.
#[test]
fn a01_gradient_correctness() {
    let mut worst_rel: f64 = 0.0;
    let mut checked = 0usize;
    for n in [1usize, 2, 3] {
        for t_len in [1usize, 3, 5] {
            for seed in 0..5u64 {
                let params = random_params(n, 1000 + seed * 17 + n as u64);
                let mut rng = CounterRng::new(2000 + seed);
                let inputs: Vec<f64> = (0..t_len).map(|_| rng.uniform(-0.5, 0.5)).collect();
                let targets: Vec<f64> = (0..t_len).map(|_| rng.uniform(-0.5, 0.5)).collect();
                let state0 = LstmState::zeros(n);
                let (_, grads) = bptt(&params, &state0, &inputs, &targets).unwrap();

                let eps = 1e-6;
                for (idx, (_, g_arr)) in grads.arrays().iter().enumerate() {
                    for k in 0..g_arr.len() {
                        let probe = |delta: f64| {
                            let mut p = params.clone();
                            p.arrays_mut()[idx].1[k] += delta;
                            sequence_loss(&p, &state0, &inputs, &targets).unwrap()
                        };
                        let numeric = (probe(eps) - probe(-eps)) / (2.0 * eps);
                        let analytic = g_arr[k];
                        let diff = (numeric - analytic).abs();
                        if diff >= 1e-8 {
                            worst_rel = worst_rel
                                .max(diff / numeric.abs().max(analytic.abs()).max(1e-300));
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    criterion(
        "01",
        "gradient-correctness",
        worst_rel < 1e-5,
        format!("{checked} entries, worst rel err {worst_rel:.2e}"),
    );
}

/// Independent scalar transcription of the cell equations, written element
/// by element straight from their definitions.
fn scalar_cell(p: &LstmParams, s: &[f64], h: &[f64], y: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let n = p.n_cells;
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let row_dot = |w: &[f64], v: &[f64], i: usize| -> f64 {
        (0..n).map(|j| w[i * n + j] * v[j]).sum()
    };
    let z: Vec<f64> = (0..n)
        .map(|i| (row_dot(&p.w_h, h, i) + p.w_y[i] * y).tanh())
        .collect();
    let mut s_next = vec![0.0; n];
    let mut h_next = vec![0.0; n];
    for i in 0..n {
        let g_i = sig(row_dot(&p.w_i, &z, i) + p.b_i[i]);
        let g_o = sig(row_dot(&p.w_o, &z, i) + p.b_o[i]);
        let g_f = sig(row_dot(&p.w_f, &z, i) + p.b_f[i]);
        let candidate = sig(row_dot(&p.w_s, &z, i) + p.b_s[i]);
        s_next[i] = g_f * s[i] + g_i * candidate;
        h_next[i] = g_o * s_next[i].tanh();
    }
    let y_hat = (0..n)
        .map(|i| p.w_y2[i] * (row_dot(&p.w_y1, &h_next, i) + p.b_y1[i]).tanh())
        .sum::<f64>()
        + p.b_y2;
    (s_next, h_next, y_hat)
}

/// Criterion 2: the vectorized step matches the scalar reference over 100
/// random steps at N = 2 to 1e-12 relative.
#[test]
fn a02_cell_oracle() {
    let params = random_params(2, 77);
    let mut state = LstmState::zeros(2);
    let mut rng = CounterRng::new(78);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let y = rng.uniform(-0.5, 0.5);
        let (rs, rh, ry) = scalar_cell(&params, &state.s, &state.h, y);
        let (next, y_hat, _) = mg_lstm::step(&params, &state, y);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        worst = worst.max(rel(y_hat, ry));
        for i in 0..2 {
            worst = worst.max(rel(next.s[i], rs[i])).max(rel(next.h[i], rh[i]));
        }
        state = next;
    }
    criterion(
        "02",
        "cell-oracle",
        worst < 1e-12,
        format!("worst rel disagreement {worst:.2e}"),
    );
}

/// Criterion 3: sampled trajectories at dt_int = 0.1 and 0.05 differ by
/// less than 1e-6 relative over 500 samples.
#[test]
fn a03_dde_self_convergence() {
    let sample = |dt: f64| {
        integrate_mg(&MgConfig {
            dt_int: dt,
            t_end: 1600.0,
            ..MgConfig::default()
        })
        .unwrap()
    };
    let coarse = sample(0.1);
    let fine = sample(0.05);
    let max_rel = coarse.values[..500]
        .iter()
        .zip(&fine.values[..500])
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    criterion(
        "03",
        "dde-self-convergence",
        max_rel < 1e-6,
        format!("max rel diff over 500 samples {max_rel:.2e}"),
    );
}

/// Criterion 4: the contribution ratio on hand-built traces matches the
/// four-term hand computation exactly.
#[test]
fn a04_alpha_brute_force() {
    let trace = |wh_h: Vec<f64>, wy_y: Vec<f64>| {
        let n = wh_h.len();
        StepTrace {
            z: wh_h.iter().zip(&wy_y).map(|(a, b)| (a + b).tanh()).collect(),
            wh_h,
            wy_y,
            gate_i: vec![0.5; n],
            gate_o: vec![0.5; n],
            gate_f: vec![0.5; n],
        }
    };
    let run = PredictionRun {
        inputs: vec![0.0; 2],
        preds: vec![0.0; 2],
        truth: vec![0.0; 2],
        states: None,
        traces: Some(vec![
            trace(vec![1.0, 1.0], vec![1.0, 1.0]),
            trace(vec![3.0, 1.0], vec![1.0, 3.0]),
        ]),
        out_of_range: 0,
    };
    let result = contribution_alpha(&run).unwrap();
    let expected = (0.5 + 0.5 + 0.75 + 0.25) / 4.0;
    criterion(
        "04",
        "alpha-brute-force",
        result.alpha == expected && result.skipped == 0,
        format!("alpha = {} vs hand value {expected}", result.alpha),
    );
}

/// Criterion 5: the geometric decay profile with r = 0.8 yields lambda
/// within 1e-9 of the 150-term geometric sum.
#[test]
fn a05_lambda_closed_form() {
    let e_mu = 0.05;
    let excess = 0.85;
    let r: f64 = 0.8;
    let profile: Vec<f64> = (0..150).map(|t| e_mu + excess * r.powi(t)).collect();
    let lambda = relaxation_timescale(&profile, profile[0], e_mu, SAMPLE_SPACING);
    let closed = (1.0 - r.powi(150)) / (1.0 - r) * SAMPLE_SPACING;
    criterion(
        "05",
        "lambda-closed-form",
        (lambda - closed).abs() < 1e-9,
        format!("lambda {lambda:.12} vs closed form {closed:.12}"),
    );
}

/// Criterion 6: zeroth-order NRMSE on generated data lands in the
/// published brackets: sigma = 0 in [0.12, 0.18] and sigma = 0.64 in
/// [0.60, 0.72].
#[test]
fn a06_zeroth_order_brackets() {
    let traj = integrate_mg(&MgConfig {
        t_end: 12000.0,
        ..MgConfig::default()
    })
    .unwrap();
    let clean = zeroth_order_nrmse(&traj, 0.0, 61, 0);
    let noisy = zeroth_order_nrmse(&traj, 0.64, 62, 0);
    criterion(
        "06",
        "zeroth-order-brackets",
        (0.12..=0.18).contains(&clean) && (0.60..=0.72).contains(&noisy),
        format!("e_mu(0) = {clean:.4} in [0.12,0.18], e_mu(0.64) = {noisy:.4} in [0.60,0.72]"),
    );
}

// ---------------------------------------------------------------------
// Trend suite: one desk pipeline run shared by criteria 7-10.
// ---------------------------------------------------------------------

struct TrendFixture {
    _dir: tempfile::TempDir,
    /// sigma -> alpha on matched noiseless inputs.
    alpha: BTreeMap<u64, f64>,
    /// (train tag, eval tag) -> e_mu.
    sweep: BTreeMap<(u64, u64), f64>,
    /// eval tag -> zeroth-order e_mu.
    zeroth: BTreeMap<u64, f64>,
    /// sigma -> (e_0, lambda, e_mu_baseline, tail mean of e_n over [100,150)).
    impulse: BTreeMap<u64, (f64, f64, f64, f64)>,
    /// sigma -> training-loss series.
    loss_log: BTreeMap<u64, Vec<f64>>,
    sigmas: Vec<f64>,
}

fn tag(sigma: f64) -> u64 {
    mg_lstm::sigma_tag(sigma)
}

fn parse_csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect()
}

fn comment_value(path: &Path, key: &str) -> f64 {
    let text = std::fs::read_to_string(path).unwrap();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                if k.trim() == key {
                    return v.trim().parse().unwrap();
                }
            }
        }
    }
    panic!("{path:?} lacks comment {key}");
}

static TREND: LazyLock<TrendFixture> = LazyLock::new(|| {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut cfg = ExperimentConfig::desk();
    cfg.output_dir = dir.path().to_path_buf();
    eprintln!(
        "[trend fixture] running the desk pipeline ({} models, N = {})...",
        cfg.sigmas.len(),
        cfg.train.n_cells
    );
    let t0 = std::time::Instant::now();
    mg_lstm::run_pipeline(&cfg).expect("desk pipeline");
    eprintln!(
        "[trend fixture] pipeline finished in {:.0}s",
        t0.elapsed().as_secs_f64()
    );

    let results = dir.path().join("results");
    let mut alpha = BTreeMap::new();
    for row in parse_csv_rows(&results.join("alpha_vs_sigma.csv")) {
        alpha.insert(tag(row[0].parse().unwrap()), row[1].parse().unwrap());
    }
    let mut sweep = BTreeMap::new();
    for row in parse_csv_rows(&results.join("nrmse_sweep.csv")) {
        sweep.insert(
            (
                tag(row[0].parse().unwrap()),
                tag(row[1].parse().unwrap()),
            ),
            row[2].parse().unwrap(),
        );
    }
    let mut zeroth = BTreeMap::new();
    for row in parse_csv_rows(&results.join("zeroth_order.csv")) {
        zeroth.insert(tag(row[0].parse().unwrap()), row[1].parse().unwrap());
    }
    let mut impulse = BTreeMap::new();
    for &sigma in &cfg.sigmas {
        let path = results.join(format!("impulse_profile_{sigma}.csv"));
        let rows = parse_csv_rows(&path);
        let e_n: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
        let tail = &e_n[100..150];
        let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        impulse.insert(
            tag(sigma),
            (
                comment_value(&path, "e_0"),
                comment_value(&path, "lambda"),
                comment_value(&path, "e_mu"),
                tail_mean,
            ),
        );
    }
    let mut loss_log = BTreeMap::new();
    for &sigma in &cfg.sigmas {
        let path = dir.path().join(format!("models/sigma_{sigma}_train_log.csv"));
        let losses: Vec<f64> = parse_csv_rows(&path)
            .iter()
            .map(|r| r[1].parse().unwrap())
            .collect();
        loss_log.insert(tag(sigma), losses);
    }

    TrendFixture {
        _dir: dir,
        alpha,
        sweep,
        zeroth,
        impulse,
        loss_log,
        sigmas: cfg.sigmas,
    }
});

/// Criterion 7: alpha is strictly larger for the sigma = 0.64 model than
/// for sigma = 0 on matched noiseless inputs, and non-decreasing across
/// the sweep up to one adjacent-pair inversion.
#[test]
fn a07_alpha_ordering() {
    let f = &*TREND;
    let alphas: Vec<f64> = f.sigmas.iter().map(|s| f.alpha[&tag(*s)]).collect();
    let endpoints = alphas[alphas.len() - 1] > alphas[0];
    let inversions = alphas.windows(2).filter(|w| w[1] < w[0]).count();
    criterion(
        "07",
        "alpha-ordering",
        endpoints && inversions <= 1,
        format!("alphas {alphas:?}, inversions {inversions}"),
    );
}

/// Criterion 8: the noiseless-trained model is worse than the zeroth-order
/// baseline under small noise, and the sigma = 0.64 model's response is
/// flat: e_mu(sigma=0) / e_mu(sigma=0.64) > 0.25.
#[test]
fn a08_noise_sensitivity_ordering() {
    let f = &*TREND;
    let psi0_at_002 = f.sweep[&(tag(0.0), tag(0.02))];
    let zeroth_002 = f.zeroth[&tag(0.02)];
    let flat = f.sweep[&(tag(0.64), tag(0.0))] / f.sweep[&(tag(0.64), tag(0.64))];
    criterion(
        "08",
        "noise-sensitivity-ordering",
        psi0_at_002 > zeroth_002 && flat > 0.25,
        format!(
            "e(psi_0 @0.02) = {psi0_at_002:.4} vs zeroth {zeroth_002:.4}; flat ratio {flat:.3}"
        ),
    );
}

/// Criterion 9: impulse ordering — the noiseless model deviates hardest
/// (e_0(psi_0) > e_0(psi_0.64)) while the noisy model relaxes slowest
/// (lambda(psi_0.64) > lambda(psi_0.02)).
#[test]
fn a09_impulse_ordering() {
    let f = &*TREND;
    let e0_clean = f.impulse[&tag(0.0)].0;
    let e0_noisy = f.impulse[&tag(0.64)].0;
    let lambda_002 = f.impulse[&tag(0.02)].1;
    let lambda_064 = f.impulse[&tag(0.64)].1;
    criterion(
        "09",
        "impulse-ordering",
        e0_clean > e0_noisy && lambda_064 > lambda_002,
        format!(
            "e_0: {e0_clean:.3} vs {e0_noisy:.3}; lambda: {lambda_064:.2} vs {lambda_002:.2}"
        ),
    );
}

/// Criterion 10: the sigma = 0.64 model de-noises — its sequential NRMSE
/// on sigma = 0.64 input is below half the zeroth-order value.
#[test]
fn a10_denoising() {
    let f = &*TREND;
    let model = f.sweep[&(tag(0.64), tag(0.64))];
    let zeroth = f.zeroth[&tag(0.64)];
    criterion(
        "10",
        "denoising",
        model < 0.5 * zeroth,
        format!("e(psi_0.64 @0.64) = {model:.4} vs zeroth {zeroth:.4}"),
    );
}

/// Supplementary trend checks from the module contracts: the desk
/// noiseless model beats 0.05 NRMSE on held-out clean data, training loss
/// is non-increasing once smoothed over 100-step windows, and the impulse
/// profile's tail sits on the model's baseline error.
#[test]
fn a11_supplementary_contracts() {
    let f = &*TREND;

    let psi0_clean = f.sweep[&(tag(0.0), tag(0.0))];
    criterion(
        "11a",
        "desk-noiseless-nrmse",
        psi0_clean < 0.05,
        format!("e(psi_0 @0) = {psi0_clean:.4} < 0.05"),
    );

    let mut smooth_ok = true;
    let mut detail = String::new();
    for (&sigma_tag, losses) in &f.loss_log {
        let blocks: Vec<f64> = losses
            .chunks(100)
            .filter(|c| c.len() == 100)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let adjacent_ok = blocks.windows(2).all(|w| w[1] <= w[0] * 1.10);
        let overall_ok = blocks.last().unwrap() <= blocks.first().unwrap();
        if !(adjacent_ok && overall_ok) {
            smooth_ok = false;
            detail = format!("sigma tag {sigma_tag}: blocks {blocks:?}");
        }
    }
    criterion(
        "11b",
        "smoothed-loss-non-increasing",
        smooth_ok,
        if detail.is_empty() {
            "all seven logs monotone under smoothing".into()
        } else {
            detail
        },
    );

    let mut tail_ok = true;
    let mut tail_detail = String::new();
    for (&sigma_tag, &(_, _, e_mu, tail_mean)) in &f.impulse {
        let rel = (tail_mean - e_mu).abs() / e_mu;
        if rel > 0.10 {
            tail_ok = false;
            tail_detail = format!("sigma tag {sigma_tag}: tail {tail_mean:.4} vs e_mu {e_mu:.4}");
        }
    }
    criterion(
        "11c",
        "impulse-tail-on-baseline",
        tail_ok,
        if tail_detail.is_empty() {
            "tail mean within 10% of e_mu for all models".into()
        } else {
            tail_detail
        },
    );
}

//! The four measurements made on a trained model.
//!
//! * Sequential one-step prediction and its NRMSE `e_mu` against the
//!   noiseless signal (the model always receives the observation, never its
//!   own prediction).
//! * The contribution ratio `alpha`: the mean share of the input-network
//!   drive that comes from the recurrent path, per step and per cell.
//! * The periodic-impulse experiment: a spike is added to the normalized
//!   input every `period` steps and the ensemble error profile `e_n` over
//!   the following window is recorded.
//! * The relaxation timescale `lambda`: the time integral of the
//!   normalized error-decay profile.
//!
//! All diagnostics are read-only over the model; any number may run
//! concurrently.

use crate::error::{Error, Result};
use crate::lstm::{step, LstmState, StepTrace};
use crate::mg::{add_noise, Trajectory, SAMPLE_SPACING};
use crate::model::TrainedModel;
use crate::rng::{derive_seed, sigma_tag};

/// What [`sequential_predict`] should record beyond the predictions.
#[derive(Debug, Clone, Copy, Default)]
pub struct CaptureOpts {
    pub states: bool,
    pub traces: bool,
}

impl CaptureOpts {
    pub fn none() -> Self {
        CaptureOpts::default()
    }

    pub fn traces() -> Self {
        CaptureOpts {
            states: false,
            traces: true,
        }
    }
}

/// A sequential prediction run over an observation series.
#[derive(Debug, Clone)]
pub struct PredictionRun {
    /// Observations fed to the model, original scale.
    pub inputs: Vec<f64>,
    /// `preds[i]` is the model's forecast of sample `i + 1`, original scale.
    pub preds: Vec<f64>,
    /// Noiseless signal aligned with `inputs`.
    pub truth: Vec<f64>,
    pub states: Option<Vec<LstmState>>,
    pub traces: Option<Vec<StepTrace>>,
    /// Observations that fell outside the model's fitted range by more
    /// than 3 nu; a scaler-mismatch warning counter.
    pub out_of_range: usize,
}

impl PredictionRun {
    /// Aligned (prediction, truth) slices after dropping `warmup` initial
    /// predictions: `preds[i]` forecasts `truth[i + 1]`.
    pub fn one_step_pairs(&self, warmup: usize) -> (&[f64], &[f64]) {
        let last = self.preds.len().saturating_sub(1);
        let start = warmup.min(last);
        (&self.preds[start..last], &self.truth[start + 1..])
    }

    pub fn nrmse_vs_truth(&self, nu: f64, warmup: usize) -> f64 {
        let (preds, truth) = self.one_step_pairs(warmup);
        nrmse(preds, truth, nu).expect("pairs are aligned by construction")
    }
}

/// Run the model sequentially over `observations`, starting from the zero
/// state. `truth` is the noiseless signal aligned with the observations.
pub fn sequential_predict(
    model: &TrainedModel,
    observations: &[f64],
    truth: &[f64],
    capture: CaptureOpts,
) -> PredictionRun {
    assert_eq!(
        observations.len(),
        truth.len(),
        "observations and truth must be aligned"
    );
    let scaler = model.scaler;
    let slack = 3.0 * model.nu;
    let mut state = model.init_state();
    let mut preds = Vec::with_capacity(observations.len());
    let mut states = capture.states.then(|| Vec::with_capacity(observations.len()));
    let mut traces = capture.traces.then(|| Vec::with_capacity(observations.len()));
    let mut out_of_range = 0;

    for &obs in observations {
        if obs > scaler.max + slack || obs < scaler.min - slack {
            out_of_range += 1;
        }
        let (next, y_hat, trace) = step(&model.params, &state, scaler.apply(obs));
        preds.push(scaler.invert(y_hat));
        if let Some(s) = states.as_mut() {
            s.push(next.clone());
        }
        if let Some(t) = traces.as_mut() {
            t.push(trace);
        }
        state = next;
    }

    PredictionRun {
        inputs: observations.to_vec(),
        preds,
        truth: truth.to_vec(),
        states,
        traces,
        out_of_range,
    }
}

/// Normalized root-mean-square error: `sqrt(mean((truth - pred)^2)) / nu`.
pub fn nrmse(preds: &[f64], truth: &[f64], nu: f64) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truth.len(),
        });
    }
    assert!(nu > 0.0, "nu must be positive");
    let mse = preds
        .iter()
        .zip(truth)
        .map(|(p, t)| (t - p) * (t - p))
        .sum::<f64>()
        / preds.len() as f64;
    Ok(mse.sqrt() / nu)
}

/// The zeroth-order baseline: predict the next sample to equal the current
/// observation. `preds[i]` forecasts sample `i + 1`.
pub fn zeroth_order(observations: &[f64]) -> Vec<f64> {
    assert!(observations.len() >= 2, "need at least two observations");
    observations[..observations.len() - 1].to_vec()
}

/// `e_mu` of the zeroth-order baseline on fresh noisy observations of a
/// trajectory.
pub fn zeroth_order_nrmse(traj: &Trajectory, sigma: f64, seed: u64, warmup: usize) -> f64 {
    let noisy = add_noise(traj, sigma, seed);
    let preds = zeroth_order(&noisy.values);
    let start = warmup.min(preds.len() - 1);
    nrmse(&preds[start..], &traj.values[start + 1..], traj.nu)
        .expect("aligned by construction")
}

/// Result of the contribution-ratio estimate.
#[derive(Debug, Clone)]
pub struct AlphaResult {
    /// Mean over steps and cells of |W_h h| / (|W_y y| + |W_h h|).
    pub alpha: f64,
    /// alpha / (1 - alpha); infinite when alpha == 1 (ratio overflow).
    pub ratio: f64,
    /// Zero-denominator terms that were skipped.
    pub skipped: usize,
    /// Terms that entered the mean.
    pub terms: usize,
    /// Per-step, per-cell contribution terms; NaN marks a skipped term.
    pub per_step: Option<Vec<Vec<f64>>>,
}

/// Estimate the relative contribution of the recurrent path to the input
/// network over a run captured with traces.
pub fn contribution_alpha(run: &PredictionRun) -> Result<AlphaResult> {
    let traces = run
        .traces
        .as_ref()
        .expect("run must be captured with CaptureOpts::traces()");
    let mut sum = 0.0;
    let mut terms = 0usize;
    let mut skipped = 0usize;
    let mut per_step = Vec::with_capacity(traces.len());
    for trace in traces {
        let mut row = Vec::with_capacity(trace.wh_h.len());
        for (wh, wy) in trace.wh_h.iter().zip(&trace.wy_y) {
            let num = wh.abs();
            let den = num + wy.abs();
            if den == 0.0 {
                skipped += 1;
                row.push(f64::NAN);
            } else {
                let term = num / den;
                sum += term;
                terms += 1;
                row.push(term);
            }
        }
        per_step.push(row);
    }
    if terms == 0 {
        return Err(Error::UndefinedAlpha);
    }
    let alpha = sum / terms as f64;
    let ratio = if alpha < 1.0 {
        alpha / (1.0 - alpha)
    } else {
        f64::INFINITY
    };
    Ok(AlphaResult {
        alpha,
        ratio,
        skipped,
        terms,
        per_step: Some(per_step),
    })
}

/// Parameters of the periodic-impulse experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpulseConfig {
    /// Steps between impulses; also the length of the error profile.
    pub period: usize,
    /// Impulse height in normalized input units (the data occupy
    /// `[-0.5, 0.5]`).
    pub magnitude: f64,
    /// Impulse windows averaged into the profile, after one warm-up window.
    pub n_ensembles: usize,
}

impl Default for ImpulseConfig {
    fn default() -> Self {
        ImpulseConfig {
            period: 150,
            magnitude: 1.0,
            n_ensembles: 64,
        }
    }
}

/// Ensemble error profile of the impulse experiment.
#[derive(Debug, Clone)]
pub struct ImpulseResult {
    /// `e_n` for offsets n = 0..period, in NRMSE units.
    pub e_n: Vec<f64>,
    /// Initial deviation `e_n[0]`.
    pub e_0: f64,
    /// The same deviation expressed as a fraction of the impulse height in
    /// original units.
    pub e_0_impulse_units: f64,
    /// The model's own noiseless-input NRMSE over the matched sample range.
    pub e_mu_baseline: f64,
    /// Relaxation timescale, units of the sample spacing.
    pub lambda: f64,
    pub n_ensembles: usize,
}

/// Time integral of the normalized decay profile:
/// `sum_t (e_t - e_mu) / (e_0 - e_mu) * dt`.
pub fn relaxation_timescale(e_n: &[f64], e_0: f64, e_mu: f64, dt: f64) -> f64 {
    e_n.iter().map(|e| (e - e_mu) / (e_0 - e_mu)).sum::<f64>() * dt
}

/// Run the periodic-impulse experiment on noiseless data.
///
/// Every `period` steps the normalized input is raised by `magnitude`; the
/// clean observations are fed for the rest of the window. The profile
/// averages all windows after the first (warm-up) one, and `e_mu` is
/// recomputed from an unimpulsed run over the same samples.
pub fn impulse_experiment(
    model: &TrainedModel,
    clean: &Trajectory,
    config: &ImpulseConfig,
) -> Result<ImpulseResult> {
    let period = config.period;
    let windows = config.n_ensembles;
    if period == 0 || windows == 0 {
        return Err(Error::InvalidConfig(
            "impulse period and n_ensembles must be positive".into(),
        ));
    }
    let steps = (windows + 1) * period;
    if clean.len() < steps + 1 {
        return Err(Error::InvalidConfig(format!(
            "impulse experiment needs {} clean samples ({} windows of {}), got {}",
            steps + 1,
            windows + 1,
            period,
            clean.len()
        )));
    }

    let scaler = model.scaler;
    let run_once = |impulse: f64| -> Vec<f64> {
        let mut state = model.init_state();
        let mut preds = Vec::with_capacity(steps);
        for (t, &mu) in clean.values[..steps].iter().enumerate() {
            let mut y = scaler.apply(mu);
            if t % period == 0 {
                y += impulse;
            }
            let (next, y_hat, _) = step(&model.params, &state, y);
            preds.push(scaler.invert(y_hat));
            state = next;
        }
        preds
    };

    let impulsed = run_once(config.magnitude);
    let baseline = run_once(0.0);

    // Baseline e_mu over the ensemble's sample range (all windows past the
    // warm-up), prediction index p forecasting truth p + 1.
    let base_pairs: Vec<f64> = (period..steps)
        .map(|p| clean.values[p + 1] - baseline[p])
        .collect();
    let e_mu = (base_pairs.iter().map(|d| d * d).sum::<f64>() / base_pairs.len() as f64).sqrt()
        / clean.nu;

    let mut e_n = Vec::with_capacity(period);
    for offset in 0..period {
        let mut acc = 0.0;
        for w in 1..=windows {
            let p = w * period + offset;
            let d = clean.values[p + 1] - impulsed[p];
            acc += d * d;
        }
        e_n.push((acc / windows as f64).sqrt() / clean.nu);
    }

    let e_0 = e_n[0];
    if e_0 <= e_mu {
        return Err(Error::DegenerateRelaxation { e_0, e_mu });
    }
    let lambda = relaxation_timescale(&e_n, e_0, e_mu, SAMPLE_SPACING);
    let e_0_impulse_units = e_0 * clean.nu / (config.magnitude * scaler.range());

    Ok(ImpulseResult {
        e_n,
        e_0,
        e_0_impulse_units,
        e_mu_baseline: e_mu,
        lambda,
        n_ensembles: windows,
    })
}

/// One cell of the train-noise vs evaluation-noise NRMSE matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub train_sigma: f64,
    pub eval_sigma: f64,
    pub e_mu: f64,
}

/// Evaluate every model on every noise level, with a fresh derived noise
/// seed per (model, level) cell.
pub fn noise_sweep(
    models: &[TrainedModel],
    eval: &Trajectory,
    eval_sigmas: &[f64],
    seed: u64,
    warmup: usize,
) -> Vec<SweepCell> {
    let mut cells = Vec::with_capacity(models.len() * eval_sigmas.len());
    for model in models {
        let stage = format!("eval-noise-{}", sigma_tag(model.train_sigma));
        for &eval_sigma in eval_sigmas {
            let noise_seed = derive_seed(seed, &stage, sigma_tag(eval_sigma));
            let noisy = add_noise(eval, eval_sigma, noise_seed);
            let run = sequential_predict(model, &noisy.values, &eval.values, CaptureOpts::none());
            cells.push(SweepCell {
                train_sigma: model.train_sigma,
                eval_sigma,
                e_mu: run.nrmse_vs_truth(eval.nu, warmup),
            });
        }
    }
    cells
}

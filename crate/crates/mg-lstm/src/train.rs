//! Training: summed half-square loss, exact backpropagation through time,
//! ADAM with global-norm gradient clipping, and the per-noise-level
//! training loop.
//!
//! BPTT is untruncated: gradients flow through both recurrent paths (the
//! internal state s and the output state h) across the full sequence.
//! Sequences are independent windows of the training series, each started
//! from the zero state, and the targets are the (noisy) observations one
//! step ahead — nothing ever supervises against the clean signal.

use crate::error::{Error, Result};
use crate::linalg::{axpy, matvec_t_add, outer_add};
use crate::lstm::{step_full, CandidateKind, LstmParams, LstmState, StepCache};
use crate::mg::{fit_scaler, NoisySeries};
use crate::model::TrainedModel;
use crate::rng::CounterRng;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_cells: usize,
    /// Steps per training sequence (the loss summation bound T).
    pub seq_len: usize,
    /// Passes over the set of non-overlapping windows.
    pub n_epochs: usize,
    /// Sequences per gradient step; window losses and gradients are summed.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Global-norm ceiling applied to the gradient before each update.
    pub grad_clip: f64,
    /// Half-width of the uniform weight init; `None` means 1/sqrt(n_cells).
    pub init_scale: Option<f64>,
    pub candidate: CandidateKind,
    pub seed: u64,
    /// Emit a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_cells: 32,
            seq_len: 100,
            n_epochs: 160,
            batch_size: 16,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            grad_clip: 5.0,
            init_scale: None,
            candidate: CandidateKind::Sigmoid,
            seed: 1,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_cells == 0 || self.seq_len == 0 || self.n_epochs == 0 || self.batch_size == 0 {
            return fail("n_cells, seq_len, n_epochs and batch_size must be positive".into());
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("adam_epsilon", self.adam_epsilon),
            ("grad_clip", self.grad_clip),
        ] {
            if !(v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return fail(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0) {
                return fail(format!("init_scale must be positive, got {s}"));
            }
        }
        Ok(())
    }

    pub fn resolved_init_scale(&self) -> f64 {
        self.init_scale
            .unwrap_or_else(|| 1.0 / (self.n_cells as f64).sqrt())
    }
}

/// Per-parameter gradient accumulator, shaped exactly like [`LstmParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub n_cells: usize,
    pub w_h: Vec<f64>,
    pub w_y: Vec<f64>,
    pub w_i: Vec<f64>,
    pub b_i: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_o: Vec<f64>,
    pub w_f: Vec<f64>,
    pub b_f: Vec<f64>,
    pub w_s: Vec<f64>,
    pub b_s: Vec<f64>,
    pub w_y1: Vec<f64>,
    pub b_y1: Vec<f64>,
    pub w_y2: Vec<f64>,
    pub b_y2: f64,
}

impl Gradients {
    pub fn zeros(n_cells: usize) -> Self {
        Gradients {
            n_cells,
            w_h: vec![0.0; n_cells * n_cells],
            w_y: vec![0.0; n_cells],
            w_i: vec![0.0; n_cells * n_cells],
            b_i: vec![0.0; n_cells],
            w_o: vec![0.0; n_cells * n_cells],
            b_o: vec![0.0; n_cells],
            w_f: vec![0.0; n_cells * n_cells],
            b_f: vec![0.0; n_cells],
            w_s: vec![0.0; n_cells * n_cells],
            b_s: vec![0.0; n_cells],
            w_y1: vec![0.0; n_cells * n_cells],
            b_y1: vec![0.0; n_cells],
            w_y2: vec![0.0; n_cells],
            b_y2: 0.0,
        }
    }

    /// Same canonical order as [`LstmParams::arrays`].
    pub fn arrays(&self) -> [(&'static str, &[f64]); 14] {
        [
            ("w_h", &self.w_h),
            ("w_y", &self.w_y),
            ("w_i", &self.w_i),
            ("b_i", &self.b_i),
            ("w_o", &self.w_o),
            ("b_o", &self.b_o),
            ("w_f", &self.w_f),
            ("b_f", &self.b_f),
            ("w_s", &self.w_s),
            ("b_s", &self.b_s),
            ("w_y1", &self.w_y1),
            ("b_y1", &self.b_y1),
            ("w_y2", &self.w_y2),
            ("b_y2", std::slice::from_ref(&self.b_y2)),
        ]
    }

    pub fn arrays_mut(&mut self) -> [(&'static str, &mut [f64]); 14] {
        [
            ("w_h", &mut self.w_h),
            ("w_y", &mut self.w_y),
            ("w_i", &mut self.w_i),
            ("b_i", &mut self.b_i),
            ("w_o", &mut self.w_o),
            ("b_o", &mut self.b_o),
            ("w_f", &mut self.w_f),
            ("b_f", &mut self.b_f),
            ("w_s", &mut self.w_s),
            ("b_s", &mut self.b_s),
            ("w_y1", &mut self.w_y1),
            ("b_y1", &mut self.b_y1),
            ("w_y2", &mut self.w_y2),
            ("b_y2", std::slice::from_mut(&mut self.b_y2)),
        ]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.n_cells, other.n_cells);
        for ((_, a), (_, b)) in self.arrays_mut().into_iter().zip(other.arrays()) {
            axpy(a, 1.0, b);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.arrays()
            .iter()
            .map(|(_, a)| a.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, a) in self.arrays_mut() {
            for v in a {
                *v *= factor;
            }
        }
    }
}

/// Summed half-square loss over a prediction/target pair.
pub fn loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| 0.5 * (t - p) * (t - p))
        .sum())
}

/// Forward-only loss of a parameter set over one sequence, starting from
/// `initial_state`. This is the function the finite-difference gradient
/// checks probe.
pub fn sequence_loss(
    params: &LstmParams,
    initial_state: &LstmState,
    inputs: &[f64],
    targets: &[f64],
) -> Result<f64> {
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: targets.len(),
        });
    }
    let mut state = initial_state.clone();
    let mut total = 0.0;
    for (&y, &target) in inputs.iter().zip(targets) {
        let cache = step_full(params, &state, y);
        total += 0.5 * (target - cache.y_hat) * (target - cache.y_hat);
        state = LstmState {
            s: cache.s_next,
            h: cache.h_next,
        };
    }
    Ok(total)
}

/// Exact reverse-mode gradients of the summed loss over one sequence.
/// `inputs` are y_1..y_T, `targets` the observations one step ahead.
pub fn bptt(
    params: &LstmParams,
    initial_state: &LstmState,
    inputs: &[f64],
    targets: &[f64],
) -> Result<(f64, Gradients)> {
    if inputs.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: targets.len(),
        });
    }
    let n = params.n_cells;
    let mut grads = Gradients::zeros(n);
    if inputs.is_empty() {
        return Ok((0.0, grads));
    }

    // Forward, keeping every step's intermediates.
    let mut caches: Vec<StepCache> = Vec::with_capacity(inputs.len());
    let mut state = initial_state.clone();
    let mut total_loss = 0.0;
    for &y in inputs {
        let cache = step_full(params, &state, y);
        state = LstmState {
            s: cache.s_next.clone(),
            h: cache.h_next.clone(),
        };
        caches.push(cache);
    }
    for (cache, &target) in caches.iter().zip(targets) {
        total_loss += 0.5 * (target - cache.y_hat) * (target - cache.y_hat);
    }
    if !total_loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }

    // Reverse sweep. dh_carry and ds_carry hold the loss sensitivity to the
    // state produced by the step being processed, accumulated from all
    // later steps.
    let mut dh_carry = vec![0.0; n];
    let mut ds_carry = vec![0.0; n];
    let mut dh = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut dz = vec![0.0; n];
    for (cache, &target) in caches.iter().zip(targets).rev() {
        let dy_hat = cache.y_hat - target;

        // Output network.
        grads.b_y2 += dy_hat;
        axpy(&mut grads.w_y2, dy_hat, &cache.r);
        for i in 0..n {
            // d/dv of tanh(v) expressed through r = tanh(v).
            dv[i] = dy_hat * params.w_y2[i] * (1.0 - cache.r[i] * cache.r[i]);
        }
        outer_add(&mut grads.w_y1, &dv, &cache.h_next, n);
        axpy(&mut grads.b_y1, 1.0, &dv);
        dh.copy_from_slice(&dh_carry);
        matvec_t_add(&params.w_y1, &dv, n, &mut dh);

        // h' = G_o . q, s' enters through q = tanh(s') and the next step.
        let mut du_o = vec![0.0; n];
        let mut du_i = vec![0.0; n];
        let mut du_f = vec![0.0; n];
        let mut du_s = vec![0.0; n];
        let mut ds_prev = vec![0.0; n];
        for i in 0..n {
            let dg_o = dh[i] * cache.q[i];
            let dq = dh[i] * cache.g_o[i];
            let ds = ds_carry[i] + dq * (1.0 - cache.q[i] * cache.q[i]);

            let dg_f = ds * cache.s_prev[i];
            let dg_i = ds * cache.cand[i];
            let dcand = ds * cache.g_i[i];
            ds_prev[i] = ds * cache.g_f[i];

            du_o[i] = dg_o * cache.g_o[i] * (1.0 - cache.g_o[i]);
            du_i[i] = dg_i * cache.g_i[i] * (1.0 - cache.g_i[i]);
            du_f[i] = dg_f * cache.g_f[i] * (1.0 - cache.g_f[i]);
            du_s[i] = dcand * params.candidate.deriv_from_value(cache.cand[i]);
        }

        outer_add(&mut grads.w_i, &du_i, &cache.z, n);
        axpy(&mut grads.b_i, 1.0, &du_i);
        outer_add(&mut grads.w_o, &du_o, &cache.z, n);
        axpy(&mut grads.b_o, 1.0, &du_o);
        outer_add(&mut grads.w_f, &du_f, &cache.z, n);
        axpy(&mut grads.b_f, 1.0, &du_f);
        outer_add(&mut grads.w_s, &du_s, &cache.z, n);
        axpy(&mut grads.b_s, 1.0, &du_s);

        dz.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_add(&params.w_i, &du_i, n, &mut dz);
        matvec_t_add(&params.w_o, &du_o, n, &mut dz);
        matvec_t_add(&params.w_f, &du_f, n, &mut dz);
        matvec_t_add(&params.w_s, &du_s, n, &mut dz);

        // Through the input network z = tanh(W_h h + W_y y).
        let mut da = vec![0.0; n];
        for i in 0..n {
            da[i] = dz[i] * (1.0 - cache.z[i] * cache.z[i]);
        }
        outer_add(&mut grads.w_h, &da, &cache.h_prev, n);
        axpy(&mut grads.w_y, cache.y, &da);

        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_add(&params.w_h, &da, n, &mut dh_carry);
        ds_carry = ds_prev;
    }

    Ok((total_loss, grads))
}

/// Scale the gradient down to `max_norm` if its global L2 norm exceeds it.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// ADAM accumulators, one pair per parameter entry.
#[derive(Debug, Clone)]
pub struct AdamMoments {
    pub m: Gradients,
    pub v: Gradients,
    pub step_count: u64,
}

impl AdamMoments {
    pub fn zeros(n_cells: usize) -> Self {
        AdamMoments {
            m: Gradients::zeros(n_cells),
            v: Gradients::zeros(n_cells),
            step_count: 0,
        }
    }
}

/// One ADAM update with bias correction, applied after clipping `grads` at
/// `config.grad_clip` (in place). Returns the pre-clip gradient norm.
pub fn adam_step(
    params: &mut LstmParams,
    grads: &mut Gradients,
    moments: &mut AdamMoments,
    config: &TrainConfig,
) -> f64 {
    let pre_clip = clip_global_norm(grads, config.grad_clip);
    moments.step_count += 1;
    let t = moments.step_count as i32;
    let bias1 = 1.0 - config.adam_beta1.powi(t);
    let bias2 = 1.0 - config.adam_beta2.powi(t);

    let params_arrays = params.arrays_mut();
    let grad_arrays = grads.arrays();
    let m_arrays = moments.m.arrays_mut();
    let v_arrays = moments.v.arrays_mut();
    for (((p, g), m), v) in params_arrays
        .into_iter()
        .zip(grad_arrays)
        .zip(m_arrays)
        .zip(v_arrays)
    {
        debug_assert_eq!(p.0, g.0);
        for i in 0..p.1.len() {
            let grad = g.1[i];
            m.1[i] = config.adam_beta1 * m.1[i] + (1.0 - config.adam_beta1) * grad;
            v.1[i] = config.adam_beta2 * v.1[i] + (1.0 - config.adam_beta2) * grad * grad;
            let m_hat = m.1[i] / bias1;
            let v_hat = v.1[i] / bias2;
            p.1[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
        }
    }
    pre_clip
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    /// Batch loss (summed over the batch's sequences).
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: Vec<TrainLogRow>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |row| row.loss)
    }
}

/// Train one model on a noisy series. The scaler is fitted on this series
/// and travels with the model; every sequence starts from the zero state.
pub fn train(data: &NoisySeries, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(data, config, |_, _| Ok(()))
}

/// [`train`] with a checkpoint hook, invoked every `config.checkpoint_every`
/// steps (when nonzero) with the step number and the current model.
pub fn train_with<F>(data: &NoisySeries, config: &TrainConfig, mut on_checkpoint: F) -> Result<TrainOutcome>
where
    F: FnMut(u64, &TrainedModel) -> Result<()>,
{
    config.validate()?;
    let scaler = fit_scaler(data)?;
    let series = scaler.apply_all(&data.values);
    let seq = config.seq_len;
    if series.len() < seq + 1 {
        return Err(Error::InvalidConfig(format!(
            "series of {} samples is shorter than seq_len + 1 = {}",
            series.len(),
            seq + 1
        )));
    }
    let n_windows = (series.len() - 1) / seq;
    if n_windows < config.batch_size {
        return Err(Error::InvalidConfig(format!(
            "{n_windows} windows of length {seq} cannot fill a batch of {}",
            config.batch_size
        )));
    }

    let mut rng = CounterRng::new(config.seed);
    let mut params =
        LstmParams::init_uniform(config.n_cells, config.resolved_init_scale(), &mut rng);
    params.candidate = config.candidate;
    let mut moments = AdamMoments::zeros(config.n_cells);

    let snapshot = |params: &LstmParams| TrainedModel {
        params: params.clone(),
        scaler,
        train_sigma: data.sigma,
        seed: config.seed,
        nu: data.nu,
    };

    let mut starts: Vec<usize> = (0..n_windows).map(|w| w * seq).collect();
    let batches_per_epoch = n_windows / config.batch_size;
    let mut log = Vec::with_capacity(config.n_epochs * batches_per_epoch);
    let mut last_finite = snapshot(&params);
    let mut step: u64 = 0;

    for _epoch in 0..config.n_epochs {
        // Fisher-Yates reshuffle of the window order.
        for i in (1..starts.len()).rev() {
            starts.swap(i, rng.below(i + 1));
        }
        for batch in starts.chunks_exact(config.batch_size) {
            let mut grads = Gradients::zeros(config.n_cells);
            let mut batch_loss = 0.0;
            let state0 = LstmState::zeros(config.n_cells);
            for &start in batch {
                let inputs = &series[start..start + seq];
                let targets = &series[start + 1..start + seq + 1];
                let (l, g) = bptt(&params, &state0, inputs, targets)?;
                batch_loss += l;
                grads.add_assign(&g);
            }
            step += 1;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    step,
                    last_finite: Box::new(last_finite),
                });
            }
            let grad_norm = adam_step(&mut params, &mut grads, &mut moments, config);
            log.push(TrainLogRow {
                step,
                loss: batch_loss,
                grad_norm,
            });
            last_finite = snapshot(&params);
            if config.checkpoint_every > 0 && step % config.checkpoint_every as u64 == 0 {
                on_checkpoint(step, &last_finite)?;
            }
        }
    }

    Ok(TrainOutcome {
        model: snapshot(&params),
        log,
    })
}

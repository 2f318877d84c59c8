//! The LSTM cell, exactly as studied.
//!
//! One step maps a scalar observation `y` and the state pair `(s, h)` to
//! the next state and a scalar prediction:
//!
//! ```text
//! input network:   z = tanh(W_h h + W_y y)
//! gate functions:  G_m = sigmoid(W_m z + b_m),  m in {i, o, f}
//! internal state:  s' = G_f . s + G_i . sigmoid(W_s z + b_s)
//! output state:    h' = G_o . tanh(s')
//! output network:  y_hat = W_y2 tanh(W_y1 h' + b_y1) + b_y2
//! ```
//!
//! Two departures from the textbook cell are intentional and are kept as
//! written: the gates read the shared input network `z` rather than a
//! `[h, y]` concatenation, and the candidate nonlinearity in the internal
//! state update is the sigmoid (a tanh variant is available through
//! [`CandidateKind`] for comparison).
//!
//! Each step also records the two input-network drive vectors `W_h h` and
//! `W_y y`; their L1 norms are the raw material for the recurrent-vs-data
//! contribution diagnostics.

use crate::error::{Error, Result};
use crate::linalg::{dot, matvec};
use crate::rng::CounterRng;

/// Numerically stable logistic function; exact 0/1 in the saturated tails
/// instead of overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Nonlinearity of the candidate term in the internal-state update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    /// As the cell equations define it.
    #[default]
    Sigmoid,
    /// The conventional variant, for comparison runs.
    Tanh,
}

impl CandidateKind {
    #[inline]
    pub(crate) fn eval(self, x: f64) -> f64 {
        match self {
            CandidateKind::Sigmoid => sigmoid(x),
            CandidateKind::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation value.
    #[inline]
    pub(crate) fn deriv_from_value(self, v: f64) -> f64 {
        match self {
            CandidateKind::Sigmoid => v * (1.0 - v),
            CandidateKind::Tanh => 1.0 - v * v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CandidateKind::Sigmoid => "sigmoid",
            CandidateKind::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigmoid" => Some(CandidateKind::Sigmoid),
            "tanh" => Some(CandidateKind::Tanh),
            _ => None,
        }
    }
}

/// All weights and biases of the cell. Matrices are row-major `n x n`
/// except `w_y` (`n x 1`, acting on the scalar input, no bias) and `w_y2`
/// (`1 x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub n_cells: usize,
    pub candidate: CandidateKind,
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

/// Canonical (name, rows, cols) layout of every parameter array. This
/// order is shared by the persistence format, the optimizer, and the
/// finite-difference checks.
pub const PARAM_LAYOUT: [(&str, usize, usize); 14] = [
    ("w_h", 1, 1), // rows/cols here are multipliers of n; see shape()
    ("w_y", 1, 0),
    ("w_i", 1, 1),
    ("b_i", 1, 0),
    ("w_o", 1, 1),
    ("b_o", 1, 0),
    ("w_f", 1, 1),
    ("b_f", 1, 0),
    ("w_s", 1, 1),
    ("b_s", 1, 0),
    ("w_y1", 1, 1),
    ("b_y1", 1, 0),
    ("w_y2", 1, 0),
    ("b_y2", 0, 0),
];

/// Concrete (rows, cols) of a parameter array for a given cell count.
/// Vectors are column vectors except `w_y2`, which is a row vector.
pub fn param_shape(name: &str, n: usize) -> (usize, usize) {
    match name {
        "w_h" | "w_i" | "w_o" | "w_f" | "w_s" | "w_y1" => (n, n),
        "w_y" | "b_i" | "b_o" | "b_f" | "b_s" | "b_y1" => (n, 1),
        "w_y2" => (1, n),
        "b_y2" => (1, 1),
        _ => panic!("unknown parameter {name}"),
    }
}

impl LstmParams {
    pub fn zeros(n_cells: usize) -> Self {
        assert!(n_cells >= 1, "n_cells must be at least 1");
        LstmParams {
            n_cells,
            candidate: CandidateKind::default(),
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

    /// Uniform init in `[-scale, scale]`; the forget-gate bias is then set
    /// to +1 so early training does not flush the internal state.
    pub fn init_uniform(n_cells: usize, scale: f64, rng: &mut CounterRng) -> Self {
        let mut p = LstmParams::zeros(n_cells);
        for (_, values) in p.arrays_mut() {
            for v in values {
                *v = rng.uniform(-scale, scale);
            }
        }
        for b in &mut p.b_f {
            *b = 1.0;
        }
        p
    }

    /// Named views over all 14 arrays in canonical order.
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

    pub fn n_params(&self) -> usize {
        self.arrays().iter().map(|(_, a)| a.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 1 {
            return Err(Error::ShapeMismatch("n_cells must be at least 1".into()));
        }
        for (name, values) in self.arrays() {
            let (r, c) = param_shape(name, self.n_cells);
            if values.len() != r * c {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {r}x{c} = {} entries, got {}",
                    r * c,
                    values.len()
                )));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: non-finite entry {bad}"
                )));
            }
        }
        Ok(())
    }
}

/// The state pair carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    /// Internal (cell) state.
    pub s: Vec<f64>,
    /// Output state; every entry lies in (-1, 1) after a step.
    pub h: Vec<f64>,
}

impl LstmState {
    /// The initial condition used throughout: s = 0, h = 0.
    pub fn zeros(n_cells: usize) -> Self {
        assert!(n_cells >= 1, "n_cells must be at least 1");
        LstmState {
            s: vec![0.0; n_cells],
            h: vec![0.0; n_cells],
        }
    }
}

/// Per-step record of the input-network drive and the gates.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    /// W_h h_t: the recurrent drive.
    pub wh_h: Vec<f64>,
    /// W_y y_t: the data drive.
    pub wy_y: Vec<f64>,
    /// z_t = tanh(wh_h + wy_y).
    pub z: Vec<f64>,
    pub gate_i: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub gate_f: Vec<f64>,
}

impl StepTrace {
    /// L1 norms of the two drive vectors: (|W_h h|_1, |W_y y|_1).
    pub fn l1_contribution(&self) -> (f64, f64) {
        let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum();
        (l1(&self.wh_h), l1(&self.wy_y))
    }
}

/// Everything the forward step computes, kept for reverse-mode use.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub y: f64,
    pub s_prev: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub wh_h: Vec<f64>,
    pub wy_y: Vec<f64>,
    pub z: Vec<f64>,
    pub g_i: Vec<f64>,
    pub g_o: Vec<f64>,
    pub g_f: Vec<f64>,
    /// Candidate activation in the s-update.
    pub cand: Vec<f64>,
    pub s_next: Vec<f64>,
    /// tanh(s_next).
    pub q: Vec<f64>,
    pub h_next: Vec<f64>,
    /// tanh(W_y1 h_next + b_y1).
    pub r: Vec<f64>,
    pub y_hat: f64,
}

/// Forward step with full intermediate capture.
pub(crate) fn step_full(params: &LstmParams, state: &LstmState, y: f64) -> StepCache {
    let n = params.n_cells;
    assert_eq!(state.s.len(), n, "state s has wrong length");
    assert_eq!(state.h.len(), n, "state h has wrong length");

    let mut wh_h = vec![0.0; n];
    matvec(&params.w_h, &state.h, n, &mut wh_h);
    let wy_y: Vec<f64> = params.w_y.iter().map(|w| w * y).collect();
    let z: Vec<f64> = wh_h
        .iter()
        .zip(&wy_y)
        .map(|(a, b)| (a + b).tanh())
        .collect();

    let gate = |w: &[f64], b: &[f64]| -> Vec<f64> {
        let mut u = vec![0.0; n];
        matvec(w, &z, n, &mut u);
        u.iter_mut().zip(b).for_each(|(ui, bi)| *ui = sigmoid(*ui + bi));
        u
    };
    let g_i = gate(&params.w_i, &params.b_i);
    let g_o = gate(&params.w_o, &params.b_o);
    let g_f = gate(&params.w_f, &params.b_f);

    let mut cand = vec![0.0; n];
    matvec(&params.w_s, &z, n, &mut cand);
    cand.iter_mut()
        .zip(&params.b_s)
        .for_each(|(u, b)| *u = params.candidate.eval(*u + b));

    let s_next: Vec<f64> = (0..n)
        .map(|i| g_f[i] * state.s[i] + g_i[i] * cand[i])
        .collect();
    let q: Vec<f64> = s_next.iter().map(|s| s.tanh()).collect();
    let h_next: Vec<f64> = g_o.iter().zip(&q).map(|(g, q)| g * q).collect();

    let mut r = vec![0.0; n];
    matvec(&params.w_y1, &h_next, n, &mut r);
    r.iter_mut()
        .zip(&params.b_y1)
        .for_each(|(v, b)| *v = (*v + b).tanh());
    let y_hat = dot(&params.w_y2, &r) + params.b_y2;

    StepCache {
        y,
        s_prev: state.s.clone(),
        h_prev: state.h.clone(),
        wh_h,
        wy_y,
        z,
        g_i,
        g_o,
        g_f,
        cand,
        s_next,
        q,
        h_next,
        r,
        y_hat,
    }
}

/// One cell step: returns the next state, the prediction for the following
/// sample (both in normalized units), and the step trace.
///
/// Panics if the state length does not match `params.n_cells`; misshapen
/// parameter sets are rejected earlier by [`LstmParams::validate`].
pub fn step(params: &LstmParams, state: &LstmState, y: f64) -> (LstmState, f64, StepTrace) {
    let c = step_full(params, state, y);
    (
        LstmState {
            s: c.s_next,
            h: c.h_next,
        },
        c.y_hat,
        StepTrace {
            wh_h: c.wh_h,
            wy_y: c.wy_y,
            z: c.z,
            gate_i: c.g_i,
            gate_o: c.g_o,
            gate_f: c.g_f,
        },
    )
}

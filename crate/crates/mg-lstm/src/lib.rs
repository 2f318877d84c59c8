//! Sequential prediction of noisy Mackey-Glass series with a from-scratch
//! LSTM, and the diagnostics that show how training noise shifts the
//! network from data-driven toward autonomous internal dynamics.
//!
//! The crate has four layers:
//!
//! * [`mg`] — delay-differential-equation data generation, observation
//!   noise, min/max normalization;
//! * [`lstm`] — the cell (forward step, state, per-step drive traces);
//! * [`train`] — summed half-square loss, exact backpropagation through
//!   time, ADAM with gradient clipping, and the training loop;
//! * [`diagnostics`] — sequential-prediction NRMSE, the recurrent-vs-data
//!   contribution ratio, the periodic-impulse experiment, and the
//!   relaxation timescale.
//!
//! [`experiment`] drives the whole study from one declarative config and
//! writes the result tables as CSV; the `mglstm` binary exposes it per
//! stage. The `examples/` directory has one runnable program per
//! capability.

pub mod diagnostics;
pub mod error;
mod fmt;
mod linalg;
pub mod lstm;
pub mod mg;
pub mod model;
pub mod rng;
pub mod train;

pub mod experiment;

pub use diagnostics::{
    contribution_alpha, impulse_experiment, noise_sweep, nrmse, relaxation_timescale,
    sequential_predict, zeroth_order, zeroth_order_nrmse, AlphaResult, CaptureOpts, ImpulseConfig,
    ImpulseResult, PredictionRun, SweepCell,
};
pub use error::{Error, Result};
pub use experiment::{run_pipeline, ExperimentConfig, Pipeline};
pub use lstm::{sigmoid, step, CandidateKind, LstmParams, LstmState, StepTrace};
pub use mg::{
    add_noise, fit_scaler, integrate_mg, write_series_csv, MgConfig, NoisySeries, Scaler,
    Trajectory, SAMPLE_SPACING,
};
pub use model::TrainedModel;
pub use rng::{derive_seed, sigma_tag, CounterRng};
pub use train::{
    adam_step, bptt, clip_global_norm, loss, sequence_loss, train, train_with, AdamMoments,
    Gradients, TrainConfig, TrainLogRow, TrainOutcome,
};

//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("integration diverged at t = {t}: state became non-finite (dt_int too large?)")]
    IntegrationDiverged { t: f64 },

    #[error("degenerate scale: series is constant (min == max == {value})")]
    DegenerateScale { value: f64 },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("loss became non-finite")]
    NonFiniteLoss,

    #[error("training diverged at step {step}: loss became non-finite")]
    TrainingDiverged {
        step: u64,
        /// Parameters from the last step with a finite loss.
        last_finite: Box<crate::model::TrainedModel>,
    },

    #[error("contribution ratio undefined: every per-term denominator was zero")]
    UndefinedAlpha,

    #[error(
        "degenerate relaxation: e_0 = {e_0} <= e_mu = {e_mu}, the impulse had no measurable effect"
    )]
    DegenerateRelaxation { e_0: f64, e_mu: f64 },

    #[error("model file {path}: {reason}")]
    ModelFormat { path: PathBuf, reason: String },

    #[error("missing upstream artifact {path}: run `mglstm {stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error(
        "stale artifacts in {dir}: manifest was produced by a different config \
         (hash {found} != {expected}); rerun with a clean output directory"
    )]
    StaleArtifact {
        dir: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-parseable class name, used by the CLI's one-line
    /// error output.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid-config",
            Error::IntegrationDiverged { .. } => "integration-divergence",
            Error::DegenerateScale { .. } => "degenerate-scale",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::NonFiniteLoss => "non-finite-loss",
            Error::TrainingDiverged { .. } => "training-divergence",
            Error::UndefinedAlpha => "undefined-alpha",
            Error::DegenerateRelaxation { .. } => "degenerate-relaxation",
            Error::ModelFormat { .. } => "model-format",
            Error::MissingArtifact { .. } => "missing-artifact",
            Error::StaleArtifact { .. } => "stale-artifact",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

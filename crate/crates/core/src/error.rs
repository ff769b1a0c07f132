use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Two consecutive particles are closer than the collision threshold.
    #[error("degenerate state at t = {t}: gap x[{index}] - x[{prev}] = {gap:e} is below {threshold:e}", prev = .index.saturating_sub(1))]
    Degenerate {
        t: f64,
        index: usize,
        gap: f64,
        threshold: f64,
    },

    #[error("invalid particle system: {0}")]
    InvalidState(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("mass mismatch: {a} vs {b} (W1 is only defined between equal masses)")]
    MassMismatch { a: f64, b: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown scenario '{name}'; valid catalog names: {}", valid.join(", "))]
    UnknownScenario { name: String, valid: Vec<String> },

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("scenario file error: {0}")]
    ScenarioFile(String),

    #[error("initial datum: {0}")]
    InitialDatum(String),

    /// The step controller could not make progress without violating a guard.
    #[error("step size underflow at t = {t}: {reason}")]
    StepUnderflow { t: f64, reason: String },

    #[error("envelope blow-up at t = {t}")]
    BlowUp { t: f64 },

    #[error("CFL violation: dt = {dt:e} exceeds the admissible {required:e}")]
    Cfl { dt: f64, required: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (collision, extinction, blow-up)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate { .. } | Error::StepUnderflow { .. } | Error::BlowUp { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

use crate::model::Electrode;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error(
        "{model} discretization violates the explicit Euler bound: dt*max|G_ii| = {ratio:.4} > 1"
    )]
    Stability { model: &'static str, ratio: f64 },

    #[error("{electrode} stoichiometry {value:.5} outside OCP map domain [{lo}, {hi}]")]
    Domain {
        electrode: Electrode,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("simulation diverged at step {step}: {what}")]
    SimulationDiverged { step: usize, what: String },

    #[error("observer diverged at step {step}: {what}")]
    ObserverDiverged { step: usize, what: String },

    #[error("protocol did not terminate within {max_steps} steps")]
    NonTermination { max_steps: usize },

    #[error("covariance factorization failed after jitter escalation (final jitter {jitter:e})")]
    Conditioning { jitter: f64 },

    #[error("gain design failed: observability rank {rank} < state dimension {dim}")]
    Unobservable { rank: usize, dim: usize },

    #[error("closed loop is not Schur stable (spectral radius {spectral_radius:.6})")]
    NotSchurStable { spectral_radius: f64 },

    #[error("learning gate: {0}")]
    Gate(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI, one per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Json(_) | Error::Csv(_) => 2,
            Error::Io { .. } => 3,
            Error::Stability { .. } | Error::Domain { .. } | Error::Dimension { .. } => 4,
            Error::SimulationDiverged { .. }
            | Error::ObserverDiverged { .. }
            | Error::NonTermination { .. } => 5,
            Error::Conditioning { .. } => 6,
            Error::Unobservable { .. } | Error::NotSchurStable { .. } => 7,
            Error::Gate(_) => 8,
            Error::Invalid(_) => 9,
        }
    }
}

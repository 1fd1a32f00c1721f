//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// Failures surfaced by numeric routines, estimators and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two sequences that must be paired had different lengths.
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    /// A series, quadrature or contour integral failed to reach its tolerance.
    #[error("numeric failure in {routine}: {detail}")]
    Numeric {
        routine: &'static str,
        detail: String,
    },

    /// An optimization problem has no feasible point; `constraint` names the violated bound.
    #[error("infeasible: {constraint}: {detail}")]
    Infeasible {
        constraint: &'static str,
        detail: String,
    },

    /// The pilot design cannot separate channel and slope (determinant too small).
    #[error(
        "non-identifiable pilot design: determinant {delta:.3e} below tolerance {tolerance:.3e}"
    )]
    NonIdentifiable { delta: f64, tolerance: f64 },

    /// Channel estimate magnitude below the equalization floor.
    #[error("deep fade: |h_hat| = {magnitude:.3e} below floor {floor:.3e}")]
    DeepFade { magnitude: f64, floor: f64 },

    /// Malformed or inconsistent experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while reading inputs or writing reports.
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(routine: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            routine,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("grid specs differ: {0}")]
    SpecMismatch(String),

    #[error("multiplier is not unit-modulus: ||m| - 1| = {deviation:e} at frequency {frequency}")]
    NonUnitMultiplier { frequency: f64, deviation: f64 },

    #[error("discarded imaginary mass {0:e} exceeds 1e-8")]
    ImaginaryResidue(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid is labeled {found} but the operation expects {expected}")]
    LabelMismatch { expected: String, found: String },

    #[error("guard-band leakage {leakage:e} exceeds {limit:e}")]
    Leakage { leakage: f64, limit: f64 },

    #[error("norm drifted from {before} to {after}")]
    NormDrift { before: f64, after: f64 },

    #[error("contraction would undersample: {0}")]
    Undersampled(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no peak found in a series of {len} records")]
    NoPeak { len: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("Lyapunov estimate {estimate} did not converge (last-decade drift {drift})")]
    NotConverged { estimate: f64, drift: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical monitors (norm drift, boundary
    /// leakage, aliasing guards) as opposed to bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Leakage { .. }
                | Error::NormDrift { .. }
                | Error::ImaginaryResidue(_)
                | Error::Undersampled(_)
                | Error::NotConverged { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

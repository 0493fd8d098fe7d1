use std::path::PathBuf;

use thiserror::Error;

use crate::synth::pgm::PgmError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(&'static str),

    #[error("ROC AUC is undefined: every pixel belongs to the {0} class")]
    UndefinedAuc(&'static str),

    #[error("could not reach foreground fraction {target} for sample {sample} after {attempts} attempts")]
    GenerationFailed {
        sample: usize,
        target: f64,
        attempts: usize,
    },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("{path}: {source}")]
    Pgm {
        path: PathBuf,
        #[source]
        source: PgmError,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

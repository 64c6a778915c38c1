use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {n_obs} observation(s), at least {required} required")]
    DegenerateSample { n_obs: usize, required: usize },

    #[error("non-finite entry at variable {row}, observation {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {what} ({left} vs {right})")]
    DimensionMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("Dimensions Assumption p < n1+n2 violated: p={p}, n1={n1}, n2={n2}")]
    DimensionsAssumption { p: usize, n1: usize, n2: usize },

    #[error(
        "pooled matrix n1*S1+n2*S2 is numerically singular (pivot {pivot:e} vs norm {norm:e}); \
         Dimensions Assumption p/(n1+n2) < 1 is violated or the data are degenerate"
    )]
    SingularPooled { pivot: f64, norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("spectrum integrity: bulk eigenvalue {value} at index {index} is outside (0,1)")]
    SpectrumIntegrity { index: usize, value: f64 },

    #[error("quadrature did not converge: {0}")]
    Oracle(String),

    #[error("leave-one-out matrix is numerically singular when removing observation {j}")]
    LeaveOneOutSingular { j: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Input(String),

    #[error("scenario failed: {failures} of {replicates} replicates hit numerical errors (first: {first})")]
    Scenario {
        failures: usize,
        replicates: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a statistical or numerical assumption, as opposed
    /// to malformed input or I/O problems.
    pub fn is_assumption_failure(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSample { .. }
                | Error::DimensionsAssumption { .. }
                | Error::SingularPooled { .. }
                | Error::Domain(_)
                | Error::Calibration(_)
                | Error::SpectrumIntegrity { .. }
                | Error::Oracle(_)
                | Error::LeaveOneOutSingular { .. }
                | Error::Scenario { .. }
        )
    }
}

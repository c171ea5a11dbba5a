//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("state invariant violated: {0}")]
    InvalidState(String),

    #[error("observable pattern violated: {0}")]
    ObservablePattern(String),

    /// A structural condition on the Hamiltonians failed during validation.
    /// `condition` names the check, `detail` identifies the offending state.
    #[error("condition violated ({condition}): {detail}")]
    ConditionViolation {
        condition: &'static str,
        detail: String,
    },

    #[error("numerical blow-up at step {step}: {detail}")]
    NumericalBlowup { step: u64, detail: String },

    #[error("integration diverged: {0}")]
    IntegrationDiverged(String),

    #[error("delay buffer not initialised")]
    DelayNotInitialized,

    #[error("distance value {0} outside [0, 1]")]
    InvalidDistance(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("LMI infeasible already at zero delay (best witness {witness:.3e})")]
    InfeasibleAtZero { witness: f64 },

    #[error("{failed} of {total} trajectories failed (streams {streams:?}); first error: {first}")]
    PartialResults {
        failed: usize,
        total: usize,
        streams: Vec<u64>,
        first: String,
    },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Coarse category, used by the CLI to pick an exit code.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_)
            | Error::DimensionMismatch(_)
            | Error::NotHermitian { .. }
            | Error::InvalidState(_)
            | Error::ObservablePattern(_)
            | Error::InvalidDistance(_)
            | Error::InvalidConfig(_)
            | Error::UnknownPreset(_)
            | Error::Contract(_) => "config",
            Error::ConditionViolation { .. } => "validation",
            Error::NumericalBlowup { .. }
            | Error::IntegrationDiverged(_)
            | Error::DelayNotInitialized
            | Error::PartialResults { .. } => "numerical",
            Error::InfeasibleAtZero { .. } => "infeasible",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

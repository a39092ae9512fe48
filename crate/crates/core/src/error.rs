use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index ({row}, {col}) out of bounds for dimension {dim}")]
    IndexOutOfBounds { row: usize, col: usize, dim: usize },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidValue { name: &'static str, reason: String },

    #[error("subsystem {0:?} is not part of this layout")]
    MissingSlot(crate::hilbert::Slot),

    #[error("empty subsystem selection")]
    EmptySelection,

    #[error("numerical consistency violated: {0}")]
    NumericalConsistency(String),

    #[error("integrator unstable at t = {time}: trace deviation {trace_error:e}")]
    IntegratorInstability { time: f64, trace_error: f64 },

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error("mean-field model violated at t = {time}: {reason}")]
    ModelViolation { time: f64, reason: String },

    #[error("symmetry violated: {0}")]
    SymmetryViolation(String),

    #[error("invalid integrator spec: {0}")]
    InvalidSpec(String),
}

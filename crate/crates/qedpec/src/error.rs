use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("cannot parse Pauli string at index {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("channel is singular at Pauli {label} (|f| = {value:e})")]
    SingularChannel { label: String, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("channel is not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("gate {0} is not Clifford")]
    NotClifford(String),

    #[error("frame correction for twirl element {0} is not a Pauli")]
    FrameCorrection(String),

    #[error("cannot map logical operator: {0}")]
    Mapping(String),

    #[error("propagated error has {count} terms, above the cap of {cap}")]
    TermOverflow { count: usize, cap: usize },

    #[error("exponential fit failed: {message}")]
    Fit { message: String, residuals: Vec<f64> },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

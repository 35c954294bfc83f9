use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("degenerate probe")]
    DegenerateProbe,
    #[error("unknown fixed point")]
    UnknownFixedPoint,
    #[error("index {index} is below the schedule start index {start}")]
    BelowStartIndex { index: String, start: u64 },
    #[error("index {0} lies beyond the schedule table")]
    BeyondTable(String),
    #[error("t = 0 does not give a contraction")]
    NotAContraction,
    #[error("iteration cap of {0} steps exceeded")]
    IterationCap(u64),
    #[error("modulus required")]
    ModulusRequired,
    #[error("trace too short")]
    TraceTooShort,
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("evaluation budget exceeded: {0}")]
    Budget(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("M-bound precondition violated: {0}")]
    InstanceBound(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised by the reconciliation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconError {
    #[error("frame length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("frame must not be empty")]
    EmptyFrame,
    #[error("probability {0} outside of its admissible domain")]
    Domain(f64),
    #[error("efficiency is undefined for q = 0")]
    ZeroQber,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("session is closed")]
    SessionClosed,
    #[error("malformed alist: {0}")]
    Alist(String),
    #[error("invalid parity-check matrix: {0}")]
    Matrix(String),
    #[error("degree distribution infeasible: {0}")]
    InfeasibleDistribution(String),
    #[error("binary search on a block with matching parities")]
    ParityMatch,
    #[error("nothing left to reveal")]
    NothingToReveal,
    #[error("wire format: {0}")]
    Wire(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for ReconError {
    fn from(e: std::io::Error) -> Self {
        ReconError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ReconError>;

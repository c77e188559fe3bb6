use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported Taylor order {0} (must be >= 1)")]
    UnsupportedOrder(usize),
    #[error("propagation diverged at step {step}: |state| exceeded {bound:e}")]
    PropagationDiverged { step: usize, bound: f64 },
    #[error("decision vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("qubit {qubit} out of range for width {width}")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("qubit collision on index {0}")]
    QubitCollision(usize),
    #[error("controlling a Toffoli needs a clean ancilla")]
    NeedAncilla,
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsatisfied edge ({u}, {v})")]
    UnsatisfiedEdge { u: usize, v: usize },
    #[error("premise violated: {0}")]
    Premise(String),
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("argument out of range: {0}")]
    Range(String),
}

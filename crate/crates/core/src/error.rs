use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not unitary (max deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NonHermitian(f64),

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    IndexOutOfRange { index: usize, n_qubits: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateIndex(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("register mismatch: expected {expected} qubits, found {found}")]
    RegisterMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Pauli sum has no terms")]
    EmptySum,

    #[error("unknown gate kind: {0}")]
    UnknownKind(String),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid decoupling sequence: {0}")]
    InvalidSequence(String),

    #[error("decoupling window {window} us exceeds circuit span {span} us")]
    WindowTooLong { window: f64, span: f64 },

    #[error("threshold {threshold} is not below the curve start value {start}")]
    ThresholdAboveStart { threshold: f64, start: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("qasm line {line}: {message}")]
    Qasm { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

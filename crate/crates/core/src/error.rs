use thiserror::Error;

/// Failure modes shared by every evaluation stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    /// Malformed or inconsistent input data (files, dimensions, ids).
    #[error("ingestion error: {0}")]
    Ingestion(String),
    /// Input is well-formed but violates an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A metric configuration value is out of range.
    #[error("config error: {0}")]
    Config(String),
    /// The request exceeds what the implementation supports (e.g. exact enumeration size).
    #[error("capability error: {0}")]
    Capability(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("empty sample: {0}")]
    EmptySample(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    /// Kappa is undefined when chance agreement is 1.
    #[error("undefined kappa: {0}")]
    UndefinedKappa(String),
    #[error("io error: {0}")]
    Io(String),
}

impl EvalError {
    /// Process exit code for the CLI: 2 input, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvalError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EvalError>;

use thiserror::Error;

/// Errors raised by the chain, certificate and solver routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed kernel family: {0}")]
    MalformedFamily(String),

    #[error("control value {value} at state {state} is not admissible")]
    ControlOutOfRange { state: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("stationary distribution is not unique ({classes} closed classes)")]
    NonUniqueStationary { classes: usize },

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("degenerate (all-zero) row at state {0}")]
    DegenerateRow(usize),

    #[error("absorption is not certain when starting from state {0}")]
    TransienceDetected(usize),

    #[error("invalid ball pair: {0}")]
    InvalidBalls(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("certificate failure: {0}")]
    CertificateFailure(String),

    #[error("tolerance violated: {0}")]
    ToleranceViolation(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("problem {problem}, n = {n}{}: {source}", alpha.map(|a| format!(", alpha = {a}")).unwrap_or_default())]
    Cell { problem: u8, n: usize, alpha: Option<f64>, source: Box<Error> },
}

impl Error {
    /// The innermost error beneath any cell annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Cell { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

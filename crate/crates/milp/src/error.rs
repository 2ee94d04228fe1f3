use thiserror::Error;

/// Errors raised while building a model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid bounds [{lower}, {upper}] for `{name}`")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("coefficient {value:e} out of the accepted range in `{context}`")]
    BadCoefficient { context: String, value: f64 },
    #[error("term references an unregistered variable in `{context}`")]
    UnknownVariable { context: String },
}

/// Errors raised by the bundled solver.
#[derive(Debug, Error)]
pub enum SolveError {
    /// The LP relaxation is unbounded below.
    #[error("LP relaxation is unbounded")]
    Unbounded,
    /// The factorization or pivoting broke down numerically.
    #[error("numerical breakdown: {detail}")]
    Numerical { detail: String },
}

/// Errors raised by MPS reading or writing.
#[derive(Debug, Error)]
pub enum MpsError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("MPS parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("model error while rebuilding from MPS: {0}")]
    Model(#[from] ModelError),
}

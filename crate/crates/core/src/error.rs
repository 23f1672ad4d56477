use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ill-conditioned system ({what}): condition number {cond:.3e}")]
    IllConditioned { what: String, cond: f64 },

    #[error("quadrature did not converge: {what} (step-halving gap {gap:.3e} > tol {tol:.1e})")]
    Quadrature { what: String, gap: f64, tol: f64 },

    #[error("quadrature budget exhausted: {0}")]
    Budget(String),

    #[error("Neumann series did not converge in {terms} terms (observed contraction ratio {ratio:.4})")]
    NeumannDivergence { terms: usize, ratio: f64 },

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

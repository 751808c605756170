use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by the kind of failure so callers (the CLI in
/// particular) can map them onto exit codes with [`GcrError::kind`].
#[derive(Debug, Error)]
pub enum GcrError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("formula syntax error at position {position}: {message}")]
    Formula { position: usize, message: String },

    #[error("design build error: {0}")]
    Build(String),

    #[error("estimation error: {message} (condition estimate {condition:.3e})")]
    Estimation { message: String, condition: f64 },

    #[error("inference error: {0}")]
    Inference(String),

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("infeasible target: {0}")]
    Feasibility(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification of [`GcrError`] values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, formulas, or infeasible requests.
    Data,
    /// Failures of a numerical routine.
    Numerical,
}

impl GcrError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GcrError::NotPositiveDefinite { .. }
            | GcrError::Numerical(_)
            | GcrError::NoConvergence { .. }
            | GcrError::Estimation { .. }
            | GcrError::Inference(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            GcrError::Validation(_) => "validation",
            GcrError::NotPositiveDefinite { .. } => "domain",
            GcrError::Numerical(_) => "numerical",
            GcrError::NoConvergence { .. } => "no_convergence",
            GcrError::Ingestion { .. } => "ingestion",
            GcrError::Formula { .. } => "formula",
            GcrError::Build(_) => "build",
            GcrError::Estimation { .. } => "estimation",
            GcrError::Inference(_) => "inference",
            GcrError::Diagnostic(_) => "diagnostic",
            GcrError::Feasibility(_) => "feasibility",
            GcrError::Scenario(_) => "scenario",
            GcrError::Io(_) => "io",
            GcrError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, GcrError>;

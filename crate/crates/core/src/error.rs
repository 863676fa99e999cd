use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mode count mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: usize, got: usize },

    #[error("dense representation of {n_modes} modes exceeds the limit of {limit}")]
    DenseLimit { n_modes: usize, limit: usize },

    #[error("matrix is not orthogonal (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },

    #[error("degree 2k = {two_k} exceeds l + 1 = {bound} for the Turan partition")]
    DegreeTooLarge { two_k: usize, bound: usize },

    #[error("coverage failed: {uncovered} observables have only zero minors after {retries} retries")]
    CoverageFailed { uncovered: usize, retries: usize },

    #[error("target {0} is not covered by the ensemble")]
    UncoveredTarget(String),

    #[error("eigensolver residual {0:.3e} above gate")]
    EigenResidual(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

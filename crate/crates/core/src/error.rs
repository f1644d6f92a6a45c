use num_complex::Complex64;
use thiserror::Error;

use crate::identify::ConvergenceReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations ({} eigenvalues isolated)", .converged.len())]
    NoConvergence {
        iterations: usize,
        converged: Vec<Complex64>,
    },

    #[error("matrix logarithm undefined: eigenvalue {eigenvalue} lies on the closed negative real axis (sampling time too large or data degenerate)")]
    BranchCut { eigenvalue: Complex64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration blew up at t = {time}{}", .trajectory.map(|t| format!(" (trajectory {t})")).unwrap_or_default())]
    BlowUp {
        time: f64,
        trajectory: Option<usize>,
    },

    #[error("insufficient data: m < n (m = {m}, n = {n})")]
    InsufficientData { m: usize, n: usize },

    #[error("data matrix has rank {rank} < {n}; dependent columns {dependent:?}")]
    RankDeficient {
        rank: usize,
        n: usize,
        dependent: Vec<usize>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("functional {col} failed on sample {row}: {source}")]
    Functional {
        row: usize,
        col: usize,
        source: Box<Error>,
    },

    #[error("convergence study failed at t_s = {t_s}: {source}")]
    Study {
        t_s: f64,
        partial: Box<ConvergenceReport>,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

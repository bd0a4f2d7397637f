use thiserror::Error;

use crate::regularizer::MinimizeReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("range error: λ^{exponent} overflows at spectral index {index} (λ = {eigenvalue})")]
    Range {
        index: usize,
        eigenvalue: f64,
        exponent: f64,
    },

    #[error("degenerate interval: p = r = {0}")]
    DegenerateInterval(f64),

    #[error("interpolation ratio undefined for the zero element")]
    UndefinedRatio,

    #[error("matrix property violated: {0}")]
    MatrixProperty(String),

    #[error("numeric failure: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("Petrov-Galerkin breakdown on interval {interval}: 1 + ∫c·φ_right = {pivot}")]
    SolverBreakdown { interval: usize, pivot: f64 },

    #[error("line search stagnated after {halvings} halvings at iteration {}", report.iterations)]
    Stagnation {
        halvings: usize,
        report: Box<MinimizeReport>,
    },

    #[error(
        "discrepancy ladder did not stop within n <= {max_n} (last residual {last_residual:e}, target {target:e})"
    )]
    NoStop {
        max_n: usize,
        last_residual: f64,
        target: f64,
        residuals: Vec<f64>,
    },

    #[error("insufficient data for rate fit: {0} usable points, need 3")]
    InsufficientData(usize),

    #[error("noise draw was identically zero twice")]
    ZeroNoise,

    #[error("study failed: {failed} of {total} cells failed (first: {first})")]
    StudyFailed { failed: usize, total: usize, first: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

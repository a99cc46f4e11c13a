use std::collections::BTreeMap;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unstable matrix: spectral radius {rho} >= 1")]
    Instability { rho: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("infeasible model: {0}")]
    Feasibility(String),

    #[error("filter phase error: expected {expected}, found {found}")]
    Phase {
        expected: &'static str,
        found: &'static str,
    },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("ill-posed regression: {0}")]
    IllPosedRegression(String),

    #[error("declared order {order} exceeds evident rank (sigma_n = {sigma_n:e})")]
    OrderDeficiency { order: usize, sigma_n: f64 },

    #[error("rank error: {0}")]
    Rank(String),

    #[error("no feasible candidate among {evaluated} evaluated (rejections: {rejections:?})")]
    SelectionFailure {
        evaluated: usize,
        rejections: BTreeMap<String, usize>,
    },

    #[error("closed loop diverged at step {step} (norm {norm:e})")]
    Divergence { step: usize, norm: f64 },

    #[error("ensemble failed: {0}")]
    Ensemble(String),

    #[error("log-domain error: {0}")]
    LogDomain(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}: parse error: {message}")]
    Parse { path: String, message: String },
}

impl LqgError {
    /// Process exit code: 1 for usage/parse/io problems, 2 for numerical or
    /// feasibility failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LqgError::Io { .. } | LqgError::Parse { .. } | LqgError::Parameter(_) => 1,
            _ => 2,
        }
    }

    /// Short machine-readable tag for JSON error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            LqgError::Dimension(_) => "dimension",
            LqgError::NonFinite(_) => "non_finite",
            LqgError::Parameter(_) => "parameter",
            LqgError::Instability { .. } => "instability",
            LqgError::Convergence { .. } => "convergence",
            LqgError::Numerical(_) => "numerical",
            LqgError::Feasibility(_) => "feasibility",
            LqgError::Phase { .. } => "phase",
            LqgError::InsufficientData { .. } => "insufficient_data",
            LqgError::IllPosedRegression(_) => "ill_posed_regression",
            LqgError::OrderDeficiency { .. } => "order_deficiency",
            LqgError::Rank(_) => "rank",
            LqgError::SelectionFailure { .. } => "selection_failure",
            LqgError::Divergence { .. } => "divergence",
            LqgError::Ensemble(_) => "ensemble",
            LqgError::LogDomain(_) => "log_domain",
            LqgError::Io { .. } => "io",
            LqgError::Parse { .. } => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, LqgError>;

use thiserror::Error;

use crate::flow::Trajectory;
use crate::model::FlowState;
use crate::normalize::Normalization;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("not solvable: {0}")]
    Solvability(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        last_valid: Box<FlowState>,
    },
    #[error("monitor violation at t = {t}: {what}")]
    Monitor { t: f64, what: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("normalization stalled after {iterations} iterations, residual {residual:e}")]
    NormalizationStalled {
        iterations: usize,
        residual: f64,
        best: Box<Normalization>,
    },
    #[error("run aborted: {source}")]
    RunAborted {
        source: Box<Error>,
        partial: Box<Trajectory>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

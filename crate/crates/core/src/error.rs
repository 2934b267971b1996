use ndarray::Array2;
use thiserror::Error;

use crate::estimators::EstimateResult;
use crate::solver::TraceRecord;

/// Errors raised by the structure-learning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The graph contains a directed cycle; `cycle` lists the nodes in order.
    #[error("graph contains a directed cycle through nodes {cycle:?}")]
    CyclicGraph { cycle: Vec<usize> },

    /// The objective or its gradient became non-finite during optimization.
    #[error("numerical failure: {message}")]
    NumericalFailure { message: String, iterate: Vec<f64> },

    /// The augmented Lagrangian hit `rho_max` before driving h below tolerance.
    /// `best` holds the last accepted iterate in original coordinates.
    #[error("augmented Lagrangian did not converge: h = {h:e} after rho reached {rho:e}")]
    NonConvergence { h: f64, rho: f64, best: Box<Array2<f64>>, trace: Vec<TraceRecord> },

    /// An estimator's solver stage did not converge. `partial` holds the
    /// post-processed (thresholded, repaired) result from the best iterate.
    #[error("estimator did not converge: h = {h:e}")]
    NotConverged { h: f64, partial: Box<EstimateResult> },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

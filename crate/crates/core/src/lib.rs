//! Sparse DAG structure learning with a continuous acyclicity constraint.
//!
//! Two estimator families share one augmented-Lagrangian solver: NOTEARS with
//! a fixed post-hoc threshold, and the two-stage adaptive-lasso variant
//! (NOTEARS-AL) that needs no threshold. Both have least-squares and
//! logistic scores. [`model_select`] picks the adaptive-lasso λ by
//! cross-validation over restricted refits.

pub mod acyclicity;
pub mod data;
pub mod error;
pub mod estimators;
pub mod graphs;
pub mod matrix;
pub mod model_select;
pub mod penalty;
pub mod rng;
pub mod simulate;
pub mod solver;

pub use data::{DataKind, Dataset, DatasetMeta};
pub use error::{Error, Result};
pub use matrix::WeightMatrix;
pub use penalty::{build_penalties, PenaltyWeights};
pub use solver::SolverConfig;

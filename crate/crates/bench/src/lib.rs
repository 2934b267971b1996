//! Benchmark harness for `sparsedag`: config-driven seeded sweeps, per-run
//! and aggregate tables, and plot-ready CSV bundles.

pub mod config;
pub mod error;
pub mod fit;
pub mod report;
pub mod sweep;

pub use config::{EstimatorParams, ExperimentConfig, GraphEntry, Model, SweepEstimator};
pub use error::{BenchError, Result};
pub use report::emit_plot_data;
pub use sweep::{aggregate, run_sweep, AggregateRow, MissedEdge, RunRecord, SweepOptions, SweepSummary};

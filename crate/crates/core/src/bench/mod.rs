//! Benchmark harness: test functions, space-filling designs, scoring rules
//! and the Monte Carlo repetition protocol.

mod design;
mod experiment;
mod functions;
mod metrics;

pub use design::lhs;
pub use experiment::{
    median, rep_data, run_cell, run_experiment, CellFailure, ExperimentConfig, ModelKind, ModelSpec, RepData, ScoreRow,
    ScoreTable, SummaryRow, TestFunction,
};
pub use functions::{gfunction, schaffer2};
pub use metrics::{crps, crps_gaussian, normal_cdf, normal_pdf, rmse, rmspe};

//! Seeded experiment runner.
//!
//! [`run_experiment`] drives the online loop (sample, update statistics,
//! compute `λ_t` and the bounds, refit on a geometric grid) for several
//! independent runs and writes `trace.csv` and `summary.json`.
//! [`run_validation`] evaluates a grid of concentration checks and writes
//! `validation.json`.

mod config;
mod experiment;
mod validation;

pub use config::{ExperimentConfig, RefitCadence};
pub use experiment::{
    good_event_coverage, run_experiment, simulate_experiment, simulate_experiment_with,
    trace_header, write_trace, ExperimentOutput, ExperimentSummary, GoodEventSummary, RunSummary,
    TraceRow,
};
pub use validation::{
    run_validation, validation_report, SuiteReport, ValidationConfig, ValidationReport,
    ValidationSuite,
};

//! Training loop, evaluation, metrics, run persistence and reporting.

pub mod config;
pub mod metrics;
pub mod record;
pub mod report;
pub mod train;

pub use config::RunConfig;
pub use metrics::{iqm, normalized_score, optimality_gap, stratified_bootstrap_ci};
pub use record::{aggregate, load_runs, write_run, Aggregate, RunSummary};
pub use report::{build_report, report_dirs, write_report, Report};
pub use train::{
    evaluate, references, train, train_with_diagnostics, Agent, EvalRow, References, RunRecord, TrainOutcome,
};

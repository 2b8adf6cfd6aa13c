//! Multi-task experiment runs, convergence metrics and report files.

mod curve;
mod plan;
mod report;
mod run;
pub mod suites;
mod timing;

pub use curve::{iterations_to_threshold, mean_loss_prefix, ConvergenceCurve, CurvePoint};
pub use plan::{
    DataSource, ExperimentPlan, OptimizerKind, OptimizerSettings, TaskKind, TaskSpec, Transfer,
};
pub use report::{
    curve_file_name, read_curve, snapshot_file_name, write_report, ExperimentReport,
    ReportSummary, RunMetrics, TaskAggregate, TaskRun, SUMMARY_FILE,
};
pub use run::run_experiment;
pub use timing::{timing_probe, TimingConfig, TimingStats};

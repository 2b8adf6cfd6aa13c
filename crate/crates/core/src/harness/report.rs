use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::GENERATOR_VERSION;
use crate::error::{Error, Result};
use crate::optim::MemoryBank;

use super::curve::{iterations_to_threshold, mean_loss_prefix, median, ConvergenceCurve};
use super::plan::ExperimentPlan;

/// Result of one `(seed, task)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRun {
    pub seed: u64,
    pub task: usize,
    pub task_name: String,
    /// Step budget of the task.
    pub budget: usize,
    pub curve: ConvergenceCurve,
    /// Memories the task started from, for meta variants.
    pub initial_memory: Option<MemoryBank>,
    /// Memories at the end of the task, for meta variants.
    pub final_memory: Option<MemoryBank>,
}

impl TaskRun {
    pub fn metrics(&self, threshold: f64, prefix: usize) -> RunMetrics {
        let diverged = self.curve.diverged();
        RunMetrics {
            seed: self.seed,
            task: self.task,
            task_name: self.task_name.clone(),
            steps: self.curve.len(),
            final_loss: self.curve.final_loss(),
            iterations_to_threshold: iterations_to_threshold(&self.curve, threshold),
            mean_loss_prefix: if diverged {
                None
            } else {
                mean_loss_prefix(&self.curve, prefix)
            },
            diverged,
            diverged_at: self.curve.diverged_at,
        }
    }

    /// Iterations to threshold with "never" counted as one past the budget.
    pub fn capped_iterations(&self, threshold: f64) -> usize {
        iterations_to_threshold(&self.curve, threshold).unwrap_or(self.budget + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub task: usize,
    pub task_name: String,
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub iterations_to_threshold: Option<usize>,
    /// `None` when the run diverged.
    pub mean_loss_prefix: Option<f64>,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
}

/// Cross-seed summary of one task. Runs that never reach the threshold are
/// aggregated two ways: capped at one past the budget, and excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAggregate {
    pub task: usize,
    pub task_name: String,
    pub runs: usize,
    pub diverged_runs: usize,
    pub converged_runs: usize,
    /// Mean over runs that did not diverge.
    pub mean_loss_prefix: Option<f64>,
    pub median_iterations_capped: f64,
    pub mean_iterations_capped: f64,
    pub mean_iterations_converged: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub version: String,
    pub generator_version: u32,
    pub plan: ExperimentPlan,
    pub metrics: Vec<RunMetrics>,
    pub aggregates: Vec<TaskAggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub plan: ExperimentPlan,
    pub runs: Vec<TaskRun>,
}

impl ExperimentReport {
    pub fn new(plan: ExperimentPlan, runs: Vec<TaskRun>) -> Self {
        ExperimentReport { plan, runs }
    }

    pub fn run(&self, seed: u64, task: usize) -> Option<&TaskRun> {
        self.runs.iter().find(|r| r.seed == seed && r.task == task)
    }

    pub fn task_runs(&self, task: usize) -> impl Iterator<Item = &TaskRun> {
        self.runs.iter().filter(move |r| r.task == task)
    }

    pub fn aggregate(&self, task: usize) -> TaskAggregate {
        let plan = &self.plan;
        let runs: Vec<&TaskRun> = self.task_runs(task).collect();
        let metrics: Vec<RunMetrics> = runs
            .iter()
            .map(|r| r.metrics(plan.threshold, plan.prefix))
            .collect();
        let prefixes: Vec<f64> = metrics.iter().filter_map(|m| m.mean_loss_prefix).collect();
        let mut capped: Vec<f64> = runs
            .iter()
            .map(|r| r.capped_iterations(plan.threshold) as f64)
            .collect();
        let converged: Vec<f64> = metrics
            .iter()
            .filter_map(|m| m.iterations_to_threshold.map(|v| v as f64))
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        TaskAggregate {
            task,
            task_name: plan.tasks[task].name.clone(),
            runs: runs.len(),
            diverged_runs: metrics.iter().filter(|m| m.diverged).count(),
            converged_runs: converged.len(),
            mean_loss_prefix: mean(&prefixes),
            mean_iterations_capped: mean(&capped).unwrap_or(f64::NAN),
            median_iterations_capped: median(&mut capped).unwrap_or(f64::NAN),
            mean_iterations_converged: mean(&converged),
        }
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            version: env!("CARGO_PKG_VERSION").to_string(),
            generator_version: GENERATOR_VERSION,
            plan: self.plan.clone(),
            metrics: self
                .runs
                .iter()
                .map(|r| r.metrics(self.plan.threshold, self.plan.prefix))
                .collect(),
            aggregates: (0..self.plan.tasks.len()).map(|t| self.aggregate(t)).collect(),
        }
    }
}

pub fn curve_file_name(seed: u64, task: usize) -> String {
    format!("seed{seed}_task{task}.csv")
}

pub fn snapshot_file_name(seed: u64, task: usize, group: &str) -> String {
    format!("seed{seed}_task{task}_memory_{group}.json")
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Writes one CSV per curve, `summary.json`, and one snapshot JSON per
/// final memory. Returns the written paths.
pub fn write_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for run in &report.runs {
        let path = dir.join(curve_file_name(run.seed, run.task));
        write_curve(&run.curve, &path)?;
        written.push(path);
        if let Some(bank) = &run.final_memory {
            for (group, snap) in bank.snapshots() {
                let path = dir.join(snapshot_file_name(run.seed, run.task, &group));
                fs::write(&path, snap.to_json()?).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
    }
    let path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&report.summary())?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn write_curve(curve: &ConvergenceCurve, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["step".to_string(), "loss".to_string()];
    header.extend(curve.groups.iter().map(|g| format!("mean_rate_{g}")));
    header.push("step_ms".to_string());
    w.write_record(&header)?;
    for p in &curve.points {
        let mut row = vec![p.step.to_string(), p.loss.to_string()];
        row.extend(p.mean_rates.iter().map(f64::to_string));
        row.push(p.step_ms.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a curve CSV written by [`write_report`]. Wall times are kept.
pub fn read_curve(path: impl AsRef<Path>) -> Result<ConvergenceCurve> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let groups: Vec<String> = header
        .iter()
        .filter_map(|h| h.strip_prefix("mean_rate_").map(str::to_string))
        .collect();
    let bad = |msg: &str| Error::Dataset(format!("{}: {msg}", path.display()));
    let mut curve = ConvergenceCurve::new(groups.clone());
    for record in r.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("unparsable field"))
        };
        let step = record
            .get(0)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("unparsable step"))?;
        let mean_rates = (0..groups.len()).map(|g| num(2 + g)).collect::<Result<_>>()?;
        curve.points.push(super::curve::CurvePoint {
            step,
            loss: num(1)?,
            mean_rates,
            step_ms: num(2 + groups.len())?,
        });
    }
    Ok(curve)
}

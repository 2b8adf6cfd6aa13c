//! Ready-made plans for the three benchmarks and the comparisons built on them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Variant;
use crate::error::{Error, Result};

use super::curve::median;
use super::plan::{
    DataSource, ExperimentPlan, OptimizerKind, OptimizerSettings, TaskKind, TaskSpec, Transfer,
};
use super::report::ExperimentReport;
use super::run::run_experiment;

pub const ROSENBROCK_START: [f64; 2] = [-1.2, 1.0];
pub const ROSENBROCK_THRESHOLD: f64 = 1e-2;
pub const ROSENBROCK_MAX_STEPS: usize = 20_000;

pub const CLASSIFICATION_THRESHOLD: f64 = 0.1;
pub const CLASSIFICATION_MAX_STEPS: usize = 500;
pub const CLASSIFICATION_PAIRS: [[usize; 2]; 3] = [[1, 2], [1, 3], [1, 4]];
pub const CLASSIFICATION_RATES: [f64; 3] = [0.1, 0.01, 0.001];

pub const DYNAMICS_SAMPLES: usize = 3000;
pub const DYNAMICS_PREFIX: usize = 50;
pub const DYNAMICS_RATES: [f64; 3] = [0.01, 0.001, 0.0001];

pub fn rosenbrock_settings(kind: OptimizerKind) -> OptimizerSettings {
    OptimizerSettings {
        xi: 0.001,
        memory_size: 100,
        clip: 10.0,
        ..OptimizerSettings::new(kind, 0.001)
    }
}

/// `runs` consecutive descents from the same start; every run after the
/// first continues with the previous run's memory.
pub fn rosenbrock_plan(settings: OptimizerSettings, runs: usize) -> ExperimentPlan {
    let tasks = (0..runs.max(1))
        .map(|i| {
            let memory = if i == 0 { Transfer::Fresh } else { Transfer::Reload };
            TaskSpec::new(
                format!("run{}", i + 1),
                TaskKind::Rosenbrock {
                    start: ROSENBROCK_START,
                    max_steps: ROSENBROCK_MAX_STEPS,
                    stop_below: Some(ROSENBROCK_THRESHOLD),
                },
            )
            .with_transfer(memory, Transfer::Fresh)
        })
        .collect();
    ExperimentPlan {
        name: "rosenbrock".into(),
        seeds: vec![0],
        optimizer: settings,
        threshold: ROSENBROCK_THRESHOLD,
        prefix: DYNAMICS_PREFIX,
        tasks,
    }
}

/// Steps to reach the threshold, per run.
pub fn threshold_steps(report: &ExperimentReport, seed: u64) -> Vec<Option<usize>> {
    (0..report.plan.tasks.len())
        .map(|t| {
            report
                .run(seed, t)
                .and_then(|r| super::curve::iterations_to_threshold(&r.curve, report.plan.threshold))
        })
        .collect()
}

/// Benchmark defaults for the binary classification tasks.
pub fn classification_settings(kind: OptimizerKind, eta: f64) -> OptimizerSettings {
    let xi = match kind {
        // The product of two small gradients is tiny, so the plain updater
        // needs a large step to move the rates within a few hundred steps.
        OptimizerKind::MetaGd | OptimizerKind::MetaAdam => 10.0,
        _ => 0.005,
    };
    OptimizerSettings {
        xi,
        memory_size: 100,
        clip: 1.0,
        ..OptimizerSettings::new(kind, eta)
    }
}

/// Three binary tasks in sequence; with `Transfer::Reload` each task after the
/// first starts from the previous task's memory. Networks always start fresh.
pub fn classification_plan(
    settings: OptimizerSettings,
    memory: Transfer,
    seeds: Vec<u64>,
    data: DataSource,
) -> ExperimentPlan {
    let tasks = CLASSIFICATION_PAIRS
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let memory = if i == 0 { Transfer::Fresh } else { memory };
            TaskSpec::new(
                format!("{}v{}", pair[0], pair[1]),
                TaskKind::Classification {
                    classes: *pair,
                    max_steps: CLASSIFICATION_MAX_STEPS,
                    hidden: vec![32],
                    dropout: Some(0.5),
                    stop_below: Some(CLASSIFICATION_THRESHOLD),
                    data: data.clone(),
                },
            )
            .with_transfer(memory, Transfer::Fresh)
        })
        .collect();
    ExperimentPlan {
        name: "classification".into(),
        seeds,
        optimizer: settings,
        threshold: CLASSIFICATION_THRESHOLD,
        prefix: DYNAMICS_PREFIX,
        tasks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eta: f64,
    pub optimizer: String,
    pub transfer: Transfer,
    /// Median capped iterations per task.
    pub task_medians: Vec<f64>,
    /// Median capped iterations pooled over every task after the first.
    pub later_median: f64,
    pub later_mean_capped: f64,
    pub later_mean_converged: Option<f64>,
}

impl SweepEntry {
    fn from_report(eta: f64, transfer: Transfer, report: &ExperimentReport) -> Self {
        let threshold = report.plan.threshold;
        let tasks = report.plan.tasks.len();
        let task_medians = (0..tasks)
            .map(|t| report.aggregate(t).median_iterations_capped)
            .collect();
        let later: Vec<_> = report.runs.iter().filter(|r| r.task > 0).collect();
        let mut capped: Vec<f64> = later
            .iter()
            .map(|r| r.capped_iterations(threshold) as f64)
            .collect();
        let converged: Vec<f64> = later
            .iter()
            .filter_map(|r| super::curve::iterations_to_threshold(&r.curve, threshold))
            .map(|v| v as f64)
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        SweepEntry {
            eta,
            optimizer: report.plan.optimizer.kind.label().into(),
            transfer,
            later_mean_capped: mean(&capped).unwrap_or(f64::NAN),
            later_median: median(&mut capped).unwrap_or(f64::NAN),
            later_mean_converged: mean(&converged),
            task_medians,
        }
    }
}

/// GD, fresh-memory and transferred-memory runs of `meta` at every rate.
/// `settings` maps (variant, rate) to the optimizer setup, usually
/// [`classification_settings`].
pub fn classification_sweep(
    meta: OptimizerKind,
    rates: &[f64],
    seeds: &[u64],
    data: &DataSource,
    settings: impl Fn(OptimizerKind, f64) -> OptimizerSettings,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::new();
    for &eta in rates {
        let runs = [
            (OptimizerKind::Gd, Transfer::Fresh),
            (meta, Transfer::Fresh),
            (meta, Transfer::Reload),
        ];
        for (kind, transfer) in runs {
            let plan = classification_plan(
                settings(kind, eta),
                transfer,
                seeds.to_vec(),
                data.clone(),
            );
            out.push(SweepEntry::from_report(eta, transfer, &run_experiment(&plan)?));
        }
    }
    Ok(out)
}

pub fn dynamics_settings(kind: OptimizerKind, eta: f64) -> OptimizerSettings {
    OptimizerSettings {
        xi: 0.005,
        memory_size: 200,
        clip: 1.0,
        ..OptimizerSettings::new(kind, eta)
    }
}

/// The three payload variants in order. With `reload` the later variants
/// continue both the network and the memories of the previous variant.
pub fn dynamics_plan(
    settings: OptimizerSettings,
    reload: bool,
    seeds: Vec<u64>,
    samples: usize,
) -> ExperimentPlan {
    let policy = if reload { Transfer::Reload } else { Transfer::Fresh };
    let tasks = Variant::ALL
        .iter()
        .enumerate()
        .map(|(i, &variant)| {
            let t = if i == 0 { Transfer::Fresh } else { policy };
            TaskSpec::new(
                variant.label(),
                TaskKind::Dynamics {
                    variant,
                    samples,
                    batch: 10,
                    hidden: vec![100, 50, 10],
                },
            )
            .with_transfer(t, t)
        })
        .collect();
    ExperimentPlan {
        name: "dynamics".into(),
        seeds,
        optimizer: settings,
        threshold: 1.0,
        prefix: DYNAMICS_PREFIX,
        tasks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub eta: f64,
    pub optimizer: String,
    pub variant: String,
    pub reload: bool,
    /// Seed-averaged mean loss over the first batches, diverged runs excluded.
    pub mean_loss_prefix: Option<f64>,
    pub diverged_runs: usize,
}

/// Seed-averaged prefix losses laid out as rate x optimizer x variant x reload.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DynamicsTable {
    pub rows: Vec<TableRow>,
}

impl DynamicsTable {
    pub fn get(&self, eta: f64, optimizer: OptimizerKind, variant: Variant, reload: bool) -> Option<&TableRow> {
        self.rows.iter().find(|r| {
            r.eta == eta
                && r.optimizer == optimizer.label()
                && r.variant == variant.label()
                && r.reload == reload
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Dataset(format!("table buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

/// `settings` maps (variant, rate) to the optimizer setup, usually
/// [`dynamics_settings`].
pub fn dynamics_table(
    rates: &[f64],
    kinds: &[OptimizerKind],
    seeds: &[u64],
    samples: usize,
    settings: impl Fn(OptimizerKind, f64) -> OptimizerSettings,
) -> Result<DynamicsTable> {
    let mut table = DynamicsTable::default();
    for &eta in rates {
        for &kind in kinds {
            for reload in [false, true] {
                let plan = dynamics_plan(settings(kind, eta), reload, seeds.to_vec(), samples);
                let report = run_experiment(&plan)?;
                for (t, variant) in Variant::ALL.iter().enumerate() {
                    // The first variant always starts fresh, so list it once.
                    if t == 0 && reload {
                        continue;
                    }
                    let agg = report.aggregate(t);
                    table.rows.push(TableRow {
                        eta,
                        optimizer: kind.label().into(),
                        variant: variant.label().into(),
                        reload,
                        mean_loss_prefix: agg.mean_loss_prefix,
                        diverged_runs: agg.diverged_runs,
                    });
                }
            }
        }
    }
    Ok(table)
}

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Variant;
use crate::error::{Error, Result};
use crate::memory::{SignalRule, DEFAULT_OVERLAP, DEFAULT_RATE_MAX};
use crate::optim::{
    AdamConfig, AdamOptimizer, BaseTransform, GradientDescent, MemoryBank, MetaConfig,
    MetaOptimizer, Optimizer, UpdaterConfig,
};
use crate::params::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Gd,
    MetaGd,
    MetaGdMemAdam,
    Adam,
    MetaAdam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::Gd,
        OptimizerKind::MetaGd,
        OptimizerKind::MetaGdMemAdam,
        OptimizerKind::Adam,
        OptimizerKind::MetaAdam,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OptimizerKind::Gd => "GD",
            OptimizerKind::MetaGd => "MetaGD",
            OptimizerKind::MetaGdMemAdam => "MetaGDMemAdam",
            OptimizerKind::Adam => "Adam",
            OptimizerKind::MetaAdam => "MetaAdam",
        }
    }

    pub fn has_memory(self) -> bool {
        matches!(
            self,
            OptimizerKind::MetaGd | OptimizerKind::MetaGdMemAdam | OptimizerKind::MetaAdam
        )
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    /// Accepts the display labels and snake_case names, ignoring case.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.label().to_ascii_lowercase() == key)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown optimizer `{s}` (expected one of GD, MetaGD, MetaGDMemAdam, Adam, MetaAdam)"
                ))
            })
    }
}

/// Optimizer choice and its hyperparameters, shared by every task of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    /// Base rate for GD and Adam, initial memory rate for meta variants.
    pub eta: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_memory_size")]
    pub memory_size: usize,
    /// Gradient clip bound, also the half-width of the memory's support.
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default = "default_rate_max")]
    pub rate_max: f64,
    #[serde(default)]
    pub signal_rule: SignalRule,
}

fn default_xi() -> f64 {
    0.005
}
fn default_memory_size() -> usize {
    100
}
fn default_clip() -> f64 {
    10.0
}
fn default_overlap() -> f64 {
    DEFAULT_OVERLAP
}
fn default_rate_max() -> f64 {
    DEFAULT_RATE_MAX
}

impl OptimizerSettings {
    pub fn new(kind: OptimizerKind, eta: f64) -> Self {
        OptimizerSettings {
            kind,
            eta,
            xi: default_xi(),
            memory_size: default_memory_size(),
            clip: default_clip(),
            overlap: default_overlap(),
            rate_max: default_rate_max(),
            signal_rule: SignalRule::default(),
        }
    }

    /// Meta-optimizer configuration, `None` for the memoryless variants.
    pub fn meta_config(&self) -> Option<MetaConfig> {
        let (base, updater) = match self.kind {
            OptimizerKind::Gd | OptimizerKind::Adam => return None,
            OptimizerKind::MetaGd => (BaseTransform::Identity, UpdaterConfig::plain(self.xi)),
            OptimizerKind::MetaGdMemAdam => {
                (BaseTransform::Identity, UpdaterConfig::adam(self.xi))
            }
            OptimizerKind::MetaAdam => (
                BaseTransform::Adam(AdamConfig::with_rate(1.0)),
                UpdaterConfig::plain(self.xi),
            ),
        };
        Some(MetaConfig {
            memory_size: self.memory_size,
            eta_init: self.eta,
            overlap: self.overlap,
            rate_max: self.rate_max,
            clip_bound: self.clip,
            signal_rule: self.signal_rule,
            base,
            updater,
            update_memory: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be > 0, got {}", self.eta)));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return Err(Error::InvalidConfig(format!("clip must be > 0, got {}", self.clip)));
        }
        match self.meta_config() {
            Some(cfg) => cfg.validate(),
            None => Ok(()),
        }
    }

    /// Builds the optimizer for one task. `bank` seeds the memories of meta
    /// variants and is ignored otherwise.
    pub fn build(&self, params: &ParamSet, bank: Option<MemoryBank>) -> Result<Box<dyn Optimizer>> {
        let shapes = params.shapes();
        Ok(match (self.kind, self.meta_config()) {
            (OptimizerKind::Gd, _) => Box::new(GradientDescent::new(self.eta, self.clip)),
            (OptimizerKind::Adam, _) => Box::new(AdamOptimizer::new(
                AdamConfig::with_rate(self.eta),
                self.clip,
                params,
            )?),
            (_, Some(cfg)) => match bank {
                Some(bank) => Box::new(MetaOptimizer::with_bank(cfg, &shapes, bank)?),
                None => Box::new(MetaOptimizer::new(cfg, &shapes)?),
            },
            (_, None) => unreachable!("meta variants always have a config"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transfer {
    #[default]
    Fresh,
    Reload,
}

impl FromStr for Transfer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fresh" => Ok(Transfer::Fresh),
            "reload" => Ok(Transfer::Reload),
            other => Err(Error::InvalidConfig(format!(
                "unknown transfer policy `{other}` (expected fresh or reload)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Seeded synthetic `side x side` digit images, `per_class` per class.
    Synthetic { per_class: usize, side: usize },
    /// IDX image and label files, optionally gzip-compressed.
    Idx { images: PathBuf, labels: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            per_class: 50,
            side: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskKind {
    Rosenbrock {
        #[serde(default = "default_start")]
        start: [f64; 2],
        max_steps: usize,
        #[serde(default)]
        stop_below: Option<f64>,
    },
    /// Full-batch binary classification of two digit classes.
    Classification {
        classes: [usize; 2],
        max_steps: usize,
        #[serde(default = "default_classifier_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        dropout: Option<f64>,
        #[serde(default)]
        stop_below: Option<f64>,
        #[serde(default)]
        data: DataSource,
    },
    /// One pass of sequential batches over a synthetic dynamics stream.
    Dynamics {
        variant: Variant,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_batch")]
        batch: usize,
        #[serde(default = "default_regressor_hidden")]
        hidden: Vec<usize>,
    },
}

fn default_start() -> [f64; 2] {
    [-1.2, 1.0]
}
fn default_classifier_hidden() -> Vec<usize> {
    vec![32]
}
fn default_regressor_hidden() -> Vec<usize> {
    vec![100, 50, 10]
}
fn default_samples() -> usize {
    3000
}
fn default_batch() -> usize {
    10
}

impl TaskKind {
    /// Upper bound on optimizer steps for this task.
    pub fn budget(&self) -> usize {
        match self {
            TaskKind::Rosenbrock { max_steps, .. } | TaskKind::Classification { max_steps, .. } => {
                *max_steps
            }
            TaskKind::Dynamics { samples, batch, .. } => samples.div_ceil((*batch).max(1)),
        }
    }

    fn model_key(&self) -> (&'static str, &[usize]) {
        match self {
            TaskKind::Rosenbrock { .. } => ("rosenbrock", &[]),
            TaskKind::Classification { hidden, .. } => ("classification", hidden),
            TaskKind::Dynamics { hidden, .. } => ("dynamics", hidden),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            TaskKind::Rosenbrock { start, max_steps, stop_below } => {
                if start.iter().any(|v| !v.is_finite()) {
                    return bad("rosenbrock start must be finite".into());
                }
                if *max_steps == 0 {
                    return bad("max_steps must be >= 1".into());
                }
                check_stop(*stop_below)
            }
            TaskKind::Classification {
                classes,
                max_steps,
                hidden,
                dropout,
                stop_below,
                data,
            } => {
                if classes[0] == classes[1] {
                    return bad(format!("classification needs two distinct classes, got {classes:?}"));
                }
                if *max_steps == 0 {
                    return bad("max_steps must be >= 1".into());
                }
                if hidden.contains(&0) {
                    return bad("hidden layer widths must be >= 1".into());
                }
                if let Some(p) = dropout {
                    if !(0.0..1.0).contains(p) {
                        return bad(format!("dropout must be in [0, 1), got {p}"));
                    }
                }
                if let DataSource::Synthetic { per_class, side } = data {
                    if *per_class == 0 || *side < 2 {
                        return bad("synthetic data needs per_class >= 1 and side >= 2".into());
                    }
                    if classes.iter().any(|&c| c >= 10) {
                        return bad(format!("synthetic digits have classes 0..9, got {classes:?}"));
                    }
                }
                check_stop(*stop_below)
            }
            TaskKind::Dynamics {
                samples,
                batch,
                hidden,
                ..
            } => {
                if *samples == 0 || *batch == 0 {
                    return bad("dynamics needs samples >= 1 and batch >= 1".into());
                }
                if hidden.contains(&0) {
                    return bad("hidden layer widths must be >= 1".into());
                }
                Ok(())
            }
        }
    }
}

fn check_stop(stop: Option<f64>) -> Result<()> {
    match stop {
        Some(s) if !(s.is_finite() && s > 0.0) => Err(Error::InvalidConfig(format!(
            "stop_below must be > 0, got {s}"
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    /// Whether the memories start fresh or continue from the previous task.
    #[serde(default)]
    pub memory: Transfer,
    /// Whether the model parameters start fresh or continue from the previous task.
    #[serde(default)]
    pub network: Transfer,
    pub objective: TaskKind,
}

impl TaskSpec {
    pub fn new(name: impl Into<String>, objective: TaskKind) -> Self {
        TaskSpec {
            name: name.into(),
            memory: Transfer::Fresh,
            network: Transfer::Fresh,
            objective,
        }
    }

    pub fn with_transfer(mut self, memory: Transfer, network: Transfer) -> Self {
        self.memory = memory;
        self.network = network;
        self
    }
}

/// An ordered sequence of tasks run once per seed with one optimizer setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub seeds: Vec<u64>,
    pub optimizer: OptimizerSettings,
    /// Loss level for iterations-to-threshold.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Number of leading steps averaged by the prefix metric.
    #[serde(default = "default_prefix")]
    pub prefix: usize,
    pub tasks: Vec<TaskSpec>,
}

fn default_threshold() -> f64 {
    0.1
}
fn default_prefix() -> usize {
    50
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Io { .. } => e,
            other => Error::InvalidConfig(format!("{}: {other}", path.display())),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plans serialize to toml")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.seeds.is_empty() {
            return bad("plan needs at least one seed".into());
        }
        if self.tasks.is_empty() {
            return bad("plan needs at least one task".into());
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return bad(format!("threshold must be > 0, got {}", self.threshold));
        }
        if self.prefix == 0 {
            return bad("prefix must be >= 1".into());
        }
        self.optimizer.validate()?;
        let first = &self.tasks[0];
        if first.memory != Transfer::Fresh || first.network != Transfer::Fresh {
            return bad(format!("first task `{}` must use fresh memory and network", first.name));
        }
        for (i, task) in self.tasks.iter().enumerate() {
            task.objective
                .validate()
                .map_err(|e| Error::InvalidConfig(format!("task `{}`: {e}", task.name)))?;
            if i > 0 && task.network == Transfer::Reload {
                let prev = &self.tasks[i - 1].objective;
                if prev.model_key() != task.objective.model_key() {
                    return bad(format!(
                        "task `{}` reloads the network but its model differs from the previous task",
                        task.name
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> ExperimentPlan {
        ExperimentPlan {
            name: "t".into(),
            seeds: vec![0],
            optimizer: OptimizerSettings::new(OptimizerKind::MetaGd, 0.001),
            threshold: 0.01,
            prefix: 10,
            tasks: vec![TaskSpec::new(
                "r",
                TaskKind::Rosenbrock {
                    start: [-1.2, 1.0],
                    max_steps: 10,
                    stop_below: None,
                },
            )],
        }
    }

    #[test]
    fn kind_parsing_is_lenient() {
        assert_eq!("MetaGDMemAdam".parse::<OptimizerKind>().unwrap(), OptimizerKind::MetaGdMemAdam);
        assert_eq!("meta_gd".parse::<OptimizerKind>().unwrap(), OptimizerKind::MetaGd);
        assert_eq!("gd".parse::<OptimizerKind>().unwrap(), OptimizerKind::Gd);
        assert!("sgd".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn first_task_must_be_fresh() {
        let mut p = plan();
        assert!(p.validate().is_ok());
        p.tasks[0].memory = Transfer::Reload;
        assert!(p.validate().is_err());
    }

    #[test]
    fn empty_seeds_or_tasks_rejected() {
        let mut p = plan();
        p.seeds.clear();
        assert!(p.validate().is_err());
        let mut p = plan();
        p.tasks.clear();
        assert!(p.validate().is_err());
    }

    #[test]
    fn network_reload_needs_same_model() {
        let mut p = plan();
        p.tasks.push(
            TaskSpec::new(
                "d",
                TaskKind::Dynamics {
                    variant: Variant::None,
                    samples: 10,
                    batch: 10,
                    hidden: vec![4],
                },
            )
            .with_transfer(Transfer::Reload, Transfer::Reload),
        );
        assert!(p.validate().is_err());
        p.tasks[1].network = Transfer::Fresh;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let p = plan();
        let text = p.to_toml_string();
        assert_eq!(ExperimentPlan::from_toml_str(&text).unwrap(), p);
    }

    #[test]
    fn toml_rejects_unknown_keys() {
        let text = plan().to_toml_string().replace("prefix = 10", "prefix = 10\nbogus = 1");
        assert!(ExperimentPlan::from_toml_str(&text).is_err());
    }

    #[test]
    fn budget_counts_batches() {
        let t = TaskKind::Dynamics {
            variant: Variant::None,
            samples: 25,
            batch: 10,
            hidden: vec![],
        };
        assert_eq!(t.budget(), 3);
    }
}

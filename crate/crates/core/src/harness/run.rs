use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{
    read_idx, synth_dynamics_stream, synthetic_digits, LabeledDataset, Standardizer, Variant,
    INPUT_DIM,
};
use crate::error::{Error, Result};
use crate::models::{LossKind, MlpNetwork, MlpSpec, Mode, Objective, Rosenbrock};
use crate::optim::{MemoryBank, Optimizer};
use crate::params::ParamSet;

use super::curve::{ConvergenceCurve, CurvePoint};
use super::plan::{DataSource, ExperimentPlan, TaskKind, Transfer};
use super::report::{ExperimentReport, TaskRun};

const NETWORK_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const DATA_STREAM: u64 = 3;

/// Runs every seed of a validated plan. Each seed is an independent trial:
/// its networks, dropout masks and synthetic data all derive from that seed
/// alone, so results do not depend on which other seeds are run.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let files = IdxCache::load(plan)?;
    let mut runs = Vec::with_capacity(plan.seeds.len() * plan.tasks.len());
    for &seed in &plan.seeds {
        runs.extend(run_seed(plan, seed, &files)?);
    }
    Ok(ExperimentReport::new(plan.clone(), runs))
}

fn derived_seed(seed: u64, purpose: u64, task: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | task as u64);
    rng.next_u64()
}

/// IDX datasets are read once per experiment, not once per seed.
struct IdxCache(HashMap<(PathBuf, PathBuf), LabeledDataset>);

impl IdxCache {
    fn load(plan: &ExperimentPlan) -> Result<Self> {
        let mut map = HashMap::new();
        for task in &plan.tasks {
            if let TaskKind::Classification {
                data: DataSource::Idx { images, labels },
                ..
            } = &task.objective
            {
                let key = (images.clone(), labels.clone());
                if !map.contains_key(&key) {
                    let ds = LabeledDataset::from_idx(&read_idx(images)?, &read_idx(labels)?)?;
                    map.insert(key, ds);
                }
            }
        }
        Ok(IdxCache(map))
    }

    /// Synthetic data is drawn once per seed and shared by that seed's tasks.
    fn dataset(&self, source: &DataSource, seed: u64) -> Result<LabeledDataset> {
        match source {
            DataSource::Synthetic { per_class, side } => {
                synthetic_digits(*per_class, *side, derived_seed(seed, DATA_STREAM, 0))
            }
            DataSource::Idx { images, labels } => self
                .0
                .get(&(images.clone(), labels.clone()))
                .cloned()
                .ok_or_else(|| Error::Dataset(format!("{} was not loaded", images.display()))),
        }
    }
}

enum Model {
    Point(ParamSet),
    Net(MlpNetwork),
}

impl Model {
    fn params(&self) -> &ParamSet {
        match self {
            Model::Point(p) => p,
            Model::Net(n) => n.params(),
        }
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Model::Point(p) => p,
            Model::Net(n) => n.params_mut(),
        }
    }

    fn net(&self) -> &MlpNetwork {
        match self {
            Model::Net(n) => n,
            Model::Point(_) => unreachable!("network tasks always hold a network"),
        }
    }
}

fn network_for(
    carried: Option<Model>,
    spec: MlpSpec,
    seed: u64,
    task: usize,
) -> Result<MlpNetwork> {
    match carried {
        Some(Model::Net(net)) if net.spec() == &spec => Ok(net),
        Some(_) => Err(Error::InvalidConfig(format!(
            "task {task} reloads a network whose shape does not match {:?}",
            spec.dims()
        ))),
        None => MlpNetwork::init(spec, derived_seed(seed, NETWORK_STREAM, task)),
    }
}

fn run_seed(plan: &ExperimentPlan, seed: u64, files: &IdxCache) -> Result<Vec<TaskRun>> {
    let mut model: Option<Model> = None;
    let mut bank: Option<MemoryBank> = None;
    let mut runs = Vec::with_capacity(plan.tasks.len());
    for (k, task) in plan.tasks.iter().enumerate() {
        let carried = match task.network {
            Transfer::Reload => model.take(),
            Transfer::Fresh => None,
        };
        let start_bank = match task.memory {
            Transfer::Reload => bank.take(),
            Transfer::Fresh => None,
        };
        let budget = task.objective.budget();
        let mut task_data = None;

        let (mut current, stop_below) = match &task.objective {
            TaskKind::Rosenbrock {
                start, stop_below, ..
            } => {
                let p = match carried {
                    Some(Model::Point(p)) => p,
                    _ => Rosenbrock::params(start[0], start[1]),
                };
                (Model::Point(p), *stop_below)
            }
            TaskKind::Classification {
                classes,
                hidden,
                dropout,
                stop_below,
                data,
                ..
            } => {
                let ds = files.dataset(data, seed)?.binary_task(classes[0], classes[1])?;
                let mut spec = MlpSpec::new(ds.dim, hidden, 2);
                task_data = Some(ds);
                if let Some(p) = dropout {
                    spec = spec.with_dropout(*p);
                }
                (Model::Net(network_for(carried, spec, seed, k)?), *stop_below)
            }
            TaskKind::Dynamics { hidden, .. } => {
                let spec = MlpSpec::new(INPUT_DIM, hidden, 1);
                (Model::Net(network_for(carried, spec, seed, k)?), None)
            }
        };

        let mut opt = plan.optimizer.build(current.params(), start_bank.clone())?;
        let curve = match &task.objective {
            TaskKind::Rosenbrock { .. } => {
                let mut f = Rosenbrock::default();
                drive(&mut current, opt.as_mut(), budget, stop_below, |m, _| {
                    f.loss_and_grad(m.params())
                })?
            }
            TaskKind::Classification { .. } => {
                let batch = task_data.as_ref().expect("prepared above").to_batch();
                let mut rng = ChaCha8Rng::seed_from_u64(derived_seed(seed, DROPOUT_STREAM, k));
                drive(&mut current, opt.as_mut(), budget, stop_below, |m, _| {
                    m.net().loss_and_grad(
                        &batch,
                        LossKind::SoftmaxCrossEntropy,
                        Mode::Train(&mut rng),
                    )
                })?
            }
            TaskKind::Dynamics {
                variant,
                samples,
                batch: b,
                ..
            } => {
                // Standardize with the unloaded variant's statistics so later
                // variants see a genuine shift.
                let reference = synth_dynamics_stream(Variant::None, *samples, seed)?;
                let scaler = Standardizer::fit(&reference);
                let stream = scaler.apply(&synth_dynamics_stream(*variant, *samples, seed)?);
                let n = stream.len();
                drive(&mut current, opt.as_mut(), budget, None, |m, step| {
                    let lo = (step - 1) * b;
                    let batch = stream.batch(lo..(lo + b).min(n));
                    m.net()
                        .loss_and_grad(&batch, LossKind::MeanSquaredError, Mode::Eval)
                })?
            }
        };

        let end_bank = opt.memory_bank().cloned();
        runs.push(TaskRun {
            seed,
            task: k,
            task_name: task.name.clone(),
            budget,
            curve,
            initial_memory: start_bank.or_else(|| {
                plan.optimizer
                    .meta_config()
                    .and_then(|cfg| MemoryBank::fresh(&cfg, &current.params().shapes()).ok())
            }),
            final_memory: end_bank.clone(),
        });
        bank = end_bank;
        model = Some(current);
    }
    Ok(runs)
}

/// Steps an optimizer until the budget is spent, the stop level is reached
/// or the run diverges. Divergence ends the curve without failing the run.
fn drive(
    model: &mut Model,
    opt: &mut dyn Optimizer,
    budget: usize,
    stop_below: Option<f64>,
    mut eval: impl FnMut(&Model, usize) -> Result<(f64, ParamSet)>,
) -> Result<ConvergenceCurve> {
    let groups = model
        .params()
        .groups()
        .iter()
        .map(|g| g.name.clone())
        .collect();
    let mut curve = ConvergenceCurve::new(groups);
    for step in 1..=budget {
        let started = Instant::now();
        let (loss, grad) = match eval(model, step) {
            Ok(v) => v,
            Err(Error::Diverged(_)) => {
                curve.diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || !grad.is_finite() {
            curve.diverged_at = Some(step);
            break;
        }
        let stats = match opt.step(model.params_mut(), &grad) {
            Ok(s) => s,
            Err(Error::Diverged(_)) => {
                curve.diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        };
        curve.points.push(CurvePoint {
            step,
            loss,
            mean_rates: stats.mean_rates,
            step_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if stop_below.is_some_and(|s| loss < s) {
            break;
        }
    }
    Ok(curve)
}

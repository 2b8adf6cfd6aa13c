use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{LearningRateMemory, MemorySnapshot, SignalRule, DEFAULT_RATE_MAX};
use crate::params::{GroupShape, ParamSet};

use super::adam::{AdamConfig, AdamState};
use super::updater::{MemoryUpdater, UpdaterConfig};
use super::{Optimizer, StepStats};

/// Fixed-rule transform applied to the clipped gradient before the memory
/// sees it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseTransform {
    Identity,
    /// The memory scales Adam's full step. With `rate = 1` the memory owns
    /// the overall scale.
    Adam(AdamConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub memory_size: usize,
    pub eta_init: f64,
    pub overlap: f64,
    pub rate_max: f64,
    pub clip_bound: f64,
    pub signal_rule: SignalRule,
    pub base: BaseTransform,
    pub updater: UpdaterConfig,
    /// When false the memories are only read, never trained.
    pub update_memory: bool,
}

impl MetaConfig {
    /// Gradient descent with a plainly updated memory.
    pub fn meta_gd(memory_size: usize, eta_init: f64, xi: f64, clip_bound: f64) -> Self {
        MetaConfig {
            memory_size,
            eta_init,
            overlap: 1.0,
            rate_max: DEFAULT_RATE_MAX,
            clip_bound,
            signal_rule: SignalRule::ClippedProduct,
            base: BaseTransform::Identity,
            updater: UpdaterConfig::plain(xi),
            update_memory: true,
        }
    }

    pub fn fresh_memory(&self) -> Result<LearningRateMemory> {
        LearningRateMemory::new(
            self.memory_size,
            self.clip_bound,
            self.eta_init,
            self.overlap,
        )?
        .with_rate_max(self.rate_max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_memory {
            self.updater.validate()?;
        }
        if let BaseTransform::Adam(cfg) = &self.base {
            cfg.validate()?;
        }
        self.fresh_memory().map(|_| ())
    }
}

/// One learning-rate memory per named parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    entries: Vec<(String, LearningRateMemory)>,
}

impl MemoryBank {
    pub fn fresh(config: &MetaConfig, shapes: &[GroupShape]) -> Result<Self> {
        let memory = config.fresh_memory()?;
        Ok(MemoryBank {
            entries: shapes
                .iter()
                .map(|s| (s.name.clone(), memory.clone()))
                .collect(),
        })
    }

    pub fn from_entries(entries: Vec<(String, LearningRateMemory)>) -> Self {
        MemoryBank { entries }
    }

    pub fn get(&self, name: &str) -> Option<&LearningRateMemory> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LearningRateMemory)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn snapshots(&self) -> Vec<(String, MemorySnapshot)> {
        self.entries
            .iter()
            .map(|(n, m)| (n.clone(), m.snapshot()))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct GroupState {
    prev: Vec<f64>,
    updater: MemoryUpdater,
    base: Option<AdamState>,
}

/// Gradient scaling by learned memories, trained online from consecutive
/// gradient products.
#[derive(Debug, Clone)]
pub struct MetaOptimizer {
    config: MetaConfig,
    bank: MemoryBank,
    groups: Vec<GroupState>,
}

impl MetaOptimizer {
    pub fn new(config: MetaConfig, shapes: &[GroupShape]) -> Result<Self> {
        let bank = MemoryBank::fresh(&config, shapes)?;
        Self::with_bank(config, shapes, bank)
    }

    /// Starts from previously learned memories. Bank names must match the
    /// groups exactly; the previous-gradient state starts at zero.
    pub fn with_bank(config: MetaConfig, shapes: &[GroupShape], bank: MemoryBank) -> Result<Self> {
        config.validate()?;
        if bank.len() != shapes.len() {
            return Err(Error::LengthMismatch {
                context: "memory bank size",
                expected: shapes.len(),
                actual: bank.len(),
            });
        }
        let mut ordered = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let memory = bank
                .get(&shape.name)
                .ok_or_else(|| Error::UnknownGroup(shape.name.clone()))?;
            ordered.push((shape.name.clone(), memory.clone()));
        }
        let groups = ordered
            .iter()
            .zip(shapes)
            .map(|((_, memory), shape)| GroupState {
                prev: vec![0.0; shape.dim],
                updater: config.updater.build(memory.len()),
                base: match config.base {
                    BaseTransform::Identity => None,
                    BaseTransform::Adam(cfg) => Some(AdamState::new(shape.dim, cfg)),
                },
            })
            .collect();
        Ok(MetaOptimizer {
            config,
            bank: MemoryBank::from_entries(ordered),
            groups,
        })
    }

    pub fn config(&self) -> &MetaConfig {
        &self.config
    }

    pub fn bank(&self) -> &MemoryBank {
        &self.bank
    }

    pub fn into_bank(self) -> MemoryBank {
        self.bank
    }

    pub fn memory(&self, name: &str) -> Option<&LearningRateMemory> {
        self.bank.get(name)
    }

    /// The transformed gradient remembered from the previous step.
    pub fn previous_input(&self, name: &str) -> Option<&[f64]> {
        let idx = self.bank.entries.iter().position(|(n, _)| n == name)?;
        Some(&self.groups[idx].prev)
    }

    /// One step of online meta-learning for every group: transform the
    /// clipped gradient, update the memory from the consecutive-gradient
    /// signal, then step the parameters with the updated memory's rates.
    pub fn meta_step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<StepStats> {
        params.check_matches(grads)?;
        if params.len() != self.groups.len() {
            return Err(Error::LengthMismatch {
                context: "meta optimizer group count",
                expected: self.groups.len(),
                actual: params.len(),
            });
        }
        let clip = self.config.clip_bound;
        let mut stats = StepStats {
            mean_rates: Vec::with_capacity(params.len()),
            max_memory_input: 0.0,
        };
        for (((p, g), (name, memory)), state) in params
            .groups_mut()
            .iter_mut()
            .zip(grads.groups())
            .zip(self.bank.entries.iter_mut())
            .zip(self.groups.iter_mut())
        {
            if &p.name != name {
                return Err(Error::UnknownGroup(p.name.clone()));
            }
            if state.prev.len() != g.values.len() {
                return Err(Error::LengthMismatch {
                    context: "group dimension changed between steps",
                    expected: state.prev.len(),
                    actual: g.values.len(),
                });
            }
            let mut z = super::clip_gradients(&g.values, clip);
            if let Some(adam) = state.base.as_mut() {
                z = adam.direction(&z)?;
                super::clip_in_place(&mut z, clip);
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged("gradient"));
            }
            let max_in = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            stats.max_memory_input = stats.max_memory_input.max(max_in);

            if self.config.update_memory {
                let signal = memory.pooled_signal(&state.prev, &z, self.config.signal_rule)?;
                memory.apply_update(&signal, &mut state.updater)?;
            }

            let mut rate_sum = 0.0;
            for (w, &zd) in p.values.iter_mut().zip(&z) {
                let rate = memory.predict_rate(zd);
                rate_sum += rate;
                *w -= rate * zd;
            }
            stats.mean_rates.push(if z.is_empty() {
                0.0
            } else {
                rate_sum / z.len() as f64
            });
            state.prev = z;
        }
        Ok(stats)
    }
}

impl Optimizer for MetaOptimizer {
    fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<StepStats> {
        self.meta_step(params, grads)
    }

    fn memory_bank(&self) -> Option<&MemoryBank> {
        Some(&self.bank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::gd_step;

    fn shapes_1d() -> Vec<GroupShape> {
        vec![GroupShape {
            name: "w".into(),
            dim: 1,
        }]
    }

    #[test]
    fn first_step_uses_eta_init_and_leaves_memory() {
        let cfg = MetaConfig::meta_gd(10, 0.1, 0.05, 10.0);
        let mut opt = MetaOptimizer::new(cfg, &shapes_1d()).unwrap();
        let fresh = opt.memory("w").unwrap().clone();
        let mut params = ParamSet::new().with("w", vec![1.0]);
        let grads = ParamSet::new().with("w", vec![1.0]);
        opt.meta_step(&mut params, &grads).unwrap();
        assert_eq!(opt.memory("w").unwrap(), &fresh);
        assert!((params.get("w").unwrap()[0] - 0.9).abs() < 1e-12);
        assert_eq!(opt.previous_input("w").unwrap(), &[1.0]);
    }

    #[test]
    fn disabled_updates_reduce_to_gd() {
        let mut cfg = MetaConfig::meta_gd(20, 0.01, 0.05, 10.0);
        cfg.update_memory = false;
        let mut opt = MetaOptimizer::new(cfg, &shapes_1d()).unwrap();
        let mut params = ParamSet::new().with("w", vec![2.0]);
        let mut w = vec![2.0];
        for _ in 0..50 {
            let g = vec![params.get("w").unwrap()[0] * 3.0];
            let grads = ParamSet::new().with("w", g.clone());
            opt.meta_step(&mut params, &grads).unwrap();
            w = gd_step(&w, &g, 0.01, 10.0);
        }
        assert!((params.get("w").unwrap()[0] - w[0]).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_groups() {
        let cfg = MetaConfig::meta_gd(10, 0.1, 0.05, 10.0);
        let mut opt = MetaOptimizer::new(cfg, &shapes_1d()).unwrap();
        let mut params = ParamSet::new().with("v", vec![1.0]);
        let grads = ParamSet::new().with("v", vec![1.0]);
        assert!(matches!(
            opt.meta_step(&mut params, &grads),
            Err(Error::UnknownGroup(_))
        ));
        let mut params = ParamSet::new().with("w", vec![1.0, 2.0]);
        let grads = ParamSet::new().with("w", vec![1.0, 2.0]);
        assert!(opt.meta_step(&mut params, &grads).is_err());
    }

    #[test]
    fn with_bank_checks_names() {
        let cfg = MetaConfig::meta_gd(10, 0.1, 0.05, 10.0);
        let bank = MemoryBank::from_entries(vec![("x".into(), cfg.fresh_memory().unwrap())]);
        assert!(MetaOptimizer::with_bank(cfg, &shapes_1d(), bank).is_err());
    }

    #[test]
    fn adam_base_keeps_memory_inputs_clipped() {
        let mut cfg = MetaConfig::meta_gd(10, 0.5, 0.05, 1.0);
        cfg.base = BaseTransform::Adam(AdamConfig::with_rate(1.0));
        let shapes = vec![GroupShape {
            name: "w".into(),
            dim: 3,
        }];
        let mut opt = MetaOptimizer::new(cfg, &shapes).unwrap();
        let mut params = ParamSet::new().with("w", vec![1.0, -2.0, 0.5]);
        for _ in 0..20 {
            let g: Vec<f64> = params.get("w").unwrap().iter().map(|w| 40.0 * w).collect();
            let grads = ParamSet::new().with("w", g);
            let stats = opt.meta_step(&mut params, &grads).unwrap();
            assert!(stats.max_memory_input <= 1.0);
        }
    }
}

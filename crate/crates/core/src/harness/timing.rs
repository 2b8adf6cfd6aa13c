use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{synth_dynamics_stream, sequential_batches, Standardizer, Variant, INPUT_DIM};
use crate::error::{Error, Result};
use crate::models::{LossKind, MlpNetwork, MlpSpec, Mode};

use super::plan::{OptimizerKind, OptimizerSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub kind: OptimizerKind,
    pub hidden: Vec<usize>,
    pub memory_size: usize,
    /// Timed steps, after `warmup` untimed ones.
    pub steps: usize,
    pub warmup: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            kind: OptimizerKind::MetaGd,
            hidden: vec![100, 50, 10],
            memory_size: 200,
            steps: 300,
            warmup: 20,
            batch: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub kind: OptimizerKind,
    pub memory_size: usize,
    pub parameter_count: usize,
    pub steps: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
}

/// Times the optimizer update alone (forward and backward passes excluded)
/// while training a dynamics regressor on sequential batches.
pub fn timing_probe(cfg: &TimingConfig) -> Result<TimingStats> {
    if cfg.steps == 0 || cfg.batch == 0 {
        return Err(Error::InvalidConfig("timing needs steps >= 1 and batch >= 1".into()));
    }
    let samples = (cfg.steps + cfg.warmup) * cfg.batch;
    let reference = synth_dynamics_stream(Variant::None, samples, cfg.seed)?;
    let stream = Standardizer::fit(&reference).apply(&reference);
    let mut net = MlpNetwork::init(MlpSpec::new(INPUT_DIM, &cfg.hidden, 1), cfg.seed)?;
    let mut settings = OptimizerSettings::new(cfg.kind, 0.001);
    settings.memory_size = cfg.memory_size;
    settings.clip = 1.0;
    settings.validate()?;
    let mut opt = settings.build(net.params(), None)?;

    let mut times = Vec::with_capacity(cfg.steps);
    for (i, range) in sequential_batches(stream.len(), cfg.batch).enumerate() {
        let (_, grad) = net.loss_and_grad(&stream.batch(range), LossKind::MeanSquaredError, Mode::Eval)?;
        let started = Instant::now();
        opt.step(net.params_mut(), &grad)?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        if i >= cfg.warmup {
            times.push(ms);
        }
    }
    let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let pick = |q: f64| times[((q * times.len() as f64).ceil() as usize).clamp(1, times.len()) - 1];
    Ok(TimingStats {
        kind: cfg.kind,
        memory_size: cfg.memory_size,
        parameter_count: net.params().total_len(),
        steps: times.len(),
        median_ms: pick(0.5),
        p95_ms: pick(0.95),
        mean_ms,
    })
}

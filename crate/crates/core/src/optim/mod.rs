//! Base gradient transforms, memory updaters and the meta-optimizer.

mod adam;
mod gd;
mod meta;
mod updater;

pub use adam::{AdamConfig, AdamOptimizer, AdamState};
pub use gd::{clip_gradients, clip_in_place, gd_step, GradientDescent};
pub use meta::{BaseTransform, MemoryBank, MetaConfig, MetaOptimizer};
pub use updater::{MemoryUpdater, UpdaterConfig};

use crate::error::Result;
use crate::params::ParamSet;

/// Per-step diagnostics reported by every optimizer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    /// Mean applied learning rate per group, in group order.
    pub mean_rates: Vec<f64>,
    /// Largest magnitude of any value handed to a memory this step.
    pub max_memory_input: f64,
}

pub trait Optimizer {
    fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<StepStats>;

    /// Learned memories, for optimizers that have them.
    fn memory_bank(&self) -> Option<&MemoryBank> {
        None
    }
}

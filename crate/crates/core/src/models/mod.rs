//! Differentiable objectives exposing a loss and per-group gradients.

mod mlp;
mod rosenbrock;

pub use mlp::{Batch, LossKind, MlpNetwork, MlpSpec, Mode, Targets};
pub use rosenbrock::{rosenbrock_eval, Rosenbrock};

use crate::error::Result;
use crate::params::ParamSet;

/// Anything that can be evaluated at a parameter set.
pub trait Objective {
    fn loss_and_grad(&mut self, params: &ParamSet) -> Result<(f64, ParamSet)>;
}

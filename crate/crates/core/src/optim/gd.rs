use crate::error::Result;
use crate::params::ParamSet;

use super::{Optimizer, StepStats};

pub fn clip_gradients(grad: &[f64], bound: f64) -> Vec<f64> {
    grad.iter().map(|g| g.clamp(-bound, bound)).collect()
}

pub fn clip_in_place(grad: &mut [f64], bound: f64) {
    for g in grad {
        *g = g.clamp(-bound, bound);
    }
}

/// `params - rate * clip(grad, bound)`.
pub fn gd_step(params: &[f64], grad: &[f64], rate: f64, bound: f64) -> Vec<f64> {
    params
        .iter()
        .zip(grad)
        .map(|(w, g)| w - rate * g.clamp(-bound, bound))
        .collect()
}

/// Fixed-rate gradient descent on clipped gradients.
#[derive(Debug, Clone)]
pub struct GradientDescent {
    pub rate: f64,
    pub clip_bound: f64,
}

impl GradientDescent {
    pub fn new(rate: f64, clip_bound: f64) -> Self {
        GradientDescent { rate, clip_bound }
    }
}

impl Optimizer for GradientDescent {
    fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<StepStats> {
        params.check_matches(grads)?;
        for (p, g) in params.groups_mut().iter_mut().zip(grads.groups()) {
            for (w, &dw) in p.values.iter_mut().zip(&g.values) {
                *w -= self.rate * dw.clamp(-self.clip_bound, self.clip_bound);
            }
        }
        Ok(StepStats {
            mean_rates: vec![self.rate; params.len()],
            max_memory_input: 0.0,
        })
    }
}

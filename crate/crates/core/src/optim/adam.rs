use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;

use super::{Optimizer, StepStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_rate(rate: f64) -> Self {
        AdamConfig {
            rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig(format!(
                "Adam betas must lie in [0, 1), got ({}, {})",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) || !(self.rate >= 0.0) {
            return Err(Error::InvalidConfig(
                "Adam epsilon must be positive and rate non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Bias-corrected first and second moment estimates for one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Advances the moments with `grad` and returns the full step
    /// `rate * m_hat / (sqrt(v_hat) + eps)`.
    pub fn direction(&mut self, grad: &[f64]) -> Result<Vec<f64>> {
        if grad.len() != self.m.len() {
            return Err(Error::LengthMismatch {
                context: "adam state",
                expected: self.m.len(),
                actual: grad.len(),
            });
        }
        let AdamConfig {
            rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let mut out = Vec::with_capacity(grad.len());
        for ((m, v), &g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grad) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            out.push(rate * m_hat / (v_hat.sqrt() + epsilon));
        }
        Ok(out)
    }
}

/// Plain Adam on clipped gradients, one state per group.
#[derive(Debug, Clone)]
pub struct AdamOptimizer {
    clip_bound: f64,
    states: Vec<AdamState>,
}

impl AdamOptimizer {
    pub fn new(config: AdamConfig, clip_bound: f64, params: &ParamSet) -> Result<Self> {
        config.validate()?;
        Ok(AdamOptimizer {
            clip_bound,
            states: params
                .groups()
                .iter()
                .map(|g| AdamState::new(g.values.len(), config))
                .collect(),
        })
    }
}

impl Optimizer for AdamOptimizer {
    fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<StepStats> {
        params.check_matches(grads)?;
        if self.states.len() != params.len() {
            return Err(Error::LengthMismatch {
                context: "adam group count",
                expected: self.states.len(),
                actual: params.len(),
            });
        }
        let rate = self.states.first().map_or(0.0, |s| s.config.rate);
        for ((p, g), state) in params
            .groups_mut()
            .iter_mut()
            .zip(grads.groups())
            .zip(&mut self.states)
        {
            let clipped = super::clip_gradients(&g.values, self.clip_bound);
            let dir = state.direction(&clipped)?;
            for (w, d) in p.values.iter_mut().zip(dir) {
                *w -= d;
            }
        }
        Ok(StepStats {
            mean_rates: vec![rate; params.len()],
            max_memory_input: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_rate_times_sign() {
        let mut s = AdamState::new(1, AdamConfig::with_rate(0.001));
        let d = s.direction(&[0.5]).unwrap();
        let expected = 0.001 * 0.5 / (0.5 + 1e-8);
        assert!((d[0] - expected).abs() < 1e-18);
        assert!((d[0] - 0.000_999_999_98).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_gives_zero_direction() {
        let mut s = AdamState::new(3, AdamConfig::default());
        assert_eq!(s.direction(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn constant_gradient_keeps_magnitude_at_rate() {
        let mut s = AdamState::new(1, AdamConfig::with_rate(0.01));
        for _ in 0..2 {
            let d = s.direction(&[1.0]).unwrap();
            assert!((d[0] - 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let mut s = AdamState::new(2, AdamConfig::default());
        assert!(s.direction(&[1.0]).is_err());
    }

    #[test]
    fn second_moment_non_negative() {
        let mut s = AdamState::new(2, AdamConfig::default());
        for g in [[1.0, -3.0], [-2.0, 0.5], [0.0, -0.1]] {
            s.direction(&g).unwrap();
            assert!(s.second_moment().iter().all(|&v| v >= 0.0));
        }
        assert_eq!(s.steps(), 3);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{DeltaProvider, MemorySignal};

use super::adam::{AdamConfig, AdamState};

/// How a memory's rates are moved along its pooled signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdaterConfig {
    Plain {
        xi: f64,
    },
    Adam {
        xi: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}
fn default_beta2() -> f64 {
    AdamConfig::default().beta2
}
fn default_epsilon() -> f64 {
    AdamConfig::default().epsilon
}

impl UpdaterConfig {
    pub fn plain(xi: f64) -> Self {
        UpdaterConfig::Plain { xi }
    }

    pub fn adam(xi: f64) -> Self {
        let d = AdamConfig::default();
        UpdaterConfig::Adam {
            xi,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
        }
    }

    pub fn xi(&self) -> f64 {
        match *self {
            UpdaterConfig::Plain { xi } | UpdaterConfig::Adam { xi, .. } => xi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi() > 0.0) || !self.xi().is_finite() {
            return Err(Error::InvalidConfig(format!(
                "memory step size xi must be positive, got {}",
                self.xi()
            )));
        }
        if let UpdaterConfig::Adam {
            xi,
            beta1,
            beta2,
            epsilon,
        } = *self
        {
            AdamConfig {
                rate: xi,
                beta1,
                beta2,
                epsilon,
            }
            .validate()?;
        }
        Ok(())
    }

    /// Fresh updater state for a memory with `count` local models.
    pub fn build(&self, count: usize) -> MemoryUpdater {
        match *self {
            UpdaterConfig::Plain { xi } => MemoryUpdater::Plain { xi },
            UpdaterConfig::Adam {
                xi,
                beta1,
                beta2,
                epsilon,
            } => MemoryUpdater::Adam(AdamState::new(
                count,
                AdamConfig {
                    rate: xi,
                    beta1,
                    beta2,
                    epsilon,
                },
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemoryUpdater {
    Plain { xi: f64 },
    /// Adam over the local-model rates, treating `-a_m` as the gradient of the
    /// memory loss.
    Adam(AdamState),
}

impl MemoryUpdater {
    pub fn delta(&mut self, signal: &MemorySignal) -> Vec<f64> {
        match self {
            MemoryUpdater::Plain { xi } => signal.values().iter().map(|a| *xi * a).collect(),
            MemoryUpdater::Adam(state) => {
                let grad: Vec<f64> = signal.values().iter().map(|a| -a).collect();
                match state.direction(&grad) {
                    Ok(dir) => dir.into_iter().map(|d| -d).collect(),
                    // Size mismatch is rejected by the memory before this point.
                    Err(_) => vec![0.0; signal.len()],
                }
            }
        }
    }
}

impl DeltaProvider for MemoryUpdater {
    fn deltas(&mut self, signal: &MemorySignal) -> Vec<f64> {
        self.delta(signal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_delta() {
        let mut u = UpdaterConfig::plain(0.005).build(2);
        let d = u.delta(&MemorySignal::from_values(vec![1.0, 0.0]));
        assert_eq!(d, vec![0.005, 0.0]);
    }

    #[test]
    fn zero_signal_gives_zero_delta() {
        let mut p = UpdaterConfig::plain(0.005).build(3);
        assert_eq!(p.delta(&MemorySignal::zeros(3)), vec![0.0; 3]);
        let mut a = UpdaterConfig::adam(0.005).build(3);
        assert_eq!(a.delta(&MemorySignal::zeros(3)), vec![0.0; 3]);
    }

    #[test]
    fn adam_first_step_is_sign_like() {
        let mut a = UpdaterConfig::adam(0.005).build(1);
        let d = a.delta(&MemorySignal::from_values(vec![1.0]));
        assert!((d[0] - 0.005).abs() < 1e-10);
        let mut a = UpdaterConfig::adam(0.005).build(1);
        let d = a.delta(&MemorySignal::from_values(vec![-0.01]));
        assert!((d[0] + 0.005).abs() < 1e-5);
    }

    #[test]
    fn validation() {
        assert!(UpdaterConfig::plain(0.0).validate().is_err());
        assert!(UpdaterConfig::adam(0.01).validate().is_ok());
        let bad = UpdaterConfig::Adam {
            xi: 0.01,
            beta1: 1.0,
            beta2: 0.999,
            epsilon: 1e-8,
        };
        assert!(bad.validate().is_err());
    }
}

//! Memory of learning rates for a single parameter group.
//!
//! The memory is a set of `M` locally weighted constant models placed on a
//! uniform grid over the clipped gradient range `[-g, +g]`. Each model has a
//! squared-exponential receptive field and holds one learning-rate value.
//! Predictions are the kernel-weighted average of those values; training
//! uses the product of consecutive gradients as an ascent signal.
//!
//! Storage is structure-of-arrays since the hot loops touch every center and
//! rate for every gradient coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Upper bound on any stored rate unless configured otherwise.
pub const DEFAULT_RATE_MAX: f64 = 1.0;

/// Added to the sum of kernel weights before dividing.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Kernel weights below this are treated as zero. Their total contribution
/// to a prediction is below `1e-16` in absolute terms for any `M <= 100_000`
/// with `rate_max <= 1`.
pub const WEIGHT_CUTOFF: f64 = 1e-18;

/// Overlap used when none is given: neighbor activation is `exp(-0.5)`.
pub const DEFAULT_OVERLAP: f64 = 1.0;

/// One receptive field: `(center, width, rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalModel {
    pub center: f64,
    pub width: f64,
    pub rate: f64,
}

impl LocalModel {
    /// Squared-exponential activation of this model at `z`.
    pub fn kernel_weight(&self, z: f64) -> f64 {
        let u = (z - self.center) / self.width;
        (-0.5 * u * u).exp()
    }
}

/// How the consecutive-gradient product is turned into an update signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalRule {
    /// `clamp(z_t * z_{t-1}, -1, 1)`.
    #[default]
    ClippedProduct,
    /// `sign(z_t * z_{t-1})`.
    Sign,
}

impl SignalRule {
    #[inline]
    pub fn apply(self, product: f64) -> f64 {
        match self {
            SignalRule::ClippedProduct => product.clamp(-1.0, 1.0),
            SignalRule::Sign => {
                if product > 0.0 {
                    1.0
                } else if product < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Per-local-model update accumulator, pooled over the coordinates of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorySignal(Vec<f64>);

impl MemorySignal {
    pub fn zeros(count: usize) -> Self {
        MemorySignal(vec![0.0; count])
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        MemorySignal(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0.0)
    }
}

/// Turns a pooled signal into per-model rate increments.
pub trait DeltaProvider {
    fn deltas(&mut self, signal: &MemorySignal) -> Vec<f64>;
}

/// Plain ascent: `delta_m = step * a_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlainStep(pub f64);

impl DeltaProvider for PlainStep {
    fn deltas(&mut self, signal: &MemorySignal) -> Vec<f64> {
        signal.values().iter().map(|a| self.0 * a).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningRateMemory {
    centers: Vec<f64>,
    rates: Vec<f64>,
    width: f64,
    spacing: f64,
    /// `exp(-(spacing / width)^2)`, the ratio between successive kernel ratios.
    decay: f64,
    clip_bound: f64,
    eta_init: f64,
    overlap: f64,
    rate_max: f64,
}

impl LearningRateMemory {
    /// Places `count` models uniformly over `[-clip_bound, clip_bound]`, each
    /// predicting `eta_init`, with widths `overlap * spacing`.
    pub fn new(count: usize, clip_bound: f64, eta_init: f64, overlap: f64) -> Result<Self> {
        let rates = vec![eta_init; count];
        Self::build(count, clip_bound, eta_init, overlap, DEFAULT_RATE_MAX, rates)
    }

    pub fn with_rate_max(mut self, rate_max: f64) -> Result<Self> {
        if !(rate_max > 0.0) || !rate_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "rate_max must be positive, got {rate_max}"
            )));
        }
        self.rate_max = rate_max;
        for r in &mut self.rates {
            *r = r.clamp(0.0, rate_max);
        }
        Ok(self)
    }

    fn build(
        count: usize,
        clip_bound: f64,
        eta_init: f64,
        overlap: f64,
        rate_max: f64,
        rates: Vec<f64>,
    ) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidConfig(format!(
                "a memory needs at least 2 local models, got {count}"
            )));
        }
        for (name, v) in [
            ("clip_bound", clip_bound),
            ("eta_init", eta_init),
            ("overlap", overlap),
            ("rate_max", rate_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if rates.len() != count {
            return Err(Error::LengthMismatch {
                context: "memory rates",
                expected: count,
                actual: rates.len(),
            });
        }
        let spacing = 2.0 * clip_bound / (count - 1) as f64;
        let mut centers: Vec<f64> = (0..count)
            .map(|m| -clip_bound + m as f64 * spacing)
            .collect();
        centers[count - 1] = clip_bound;
        let width = overlap * spacing;
        let step = spacing / width;
        Ok(LearningRateMemory {
            centers,
            rates,
            width,
            spacing,
            decay: (-step * step).exp(),
            clip_bound,
            eta_init,
            overlap,
            rate_max,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    pub fn eta_init(&self) -> f64 {
        self.eta_init
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn rate_max(&self) -> f64 {
        self.rate_max
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn model(&self, m: usize) -> LocalModel {
        LocalModel {
            center: self.centers[m],
            width: self.width,
            rate: self.rates[m],
        }
    }

    pub fn models(&self) -> impl Iterator<Item = LocalModel> + '_ {
        (0..self.len()).map(move |m| self.model(m))
    }

    /// Overwrites the stored rates, clamped to `[0, rate_max]`.
    pub fn set_rates(&mut self, rates: &[f64]) -> Result<()> {
        if rates.len() != self.len() {
            return Err(Error::LengthMismatch {
                context: "memory rates",
                expected: self.len(),
                actual: rates.len(),
            });
        }
        for (dst, &src) in self.rates.iter_mut().zip(rates) {
            *dst = src.clamp(0.0, self.rate_max);
        }
        Ok(())
    }

    /// Calls `visit(m, psi_m(z))` for every model with weight at least
    /// [`WEIGHT_CUTOFF`], starting at the nearest center and walking outwards.
    ///
    /// Uniform spacing and width make the ratio of neighboring weights a
    /// geometric sequence, so only three `exp` calls are needed per input.
    /// Weights decrease monotonically away from the nearest center, so each
    /// side stops at the first weight under the cutoff. With the default
    /// overlap that is about nine models per side regardless of `M`.
    #[inline]
    fn visit_weights(&self, z: f64, mut visit: impl FnMut(usize, f64)) {
        if !z.is_finite() {
            return;
        }
        let count = self.centers.len();
        let step = self.spacing / self.width;
        let half_step_sq = 0.5 * step * step;
        let pos = ((z - self.centers[0]) / self.spacing).round();
        let nearest = pos.clamp(0.0, (count - 1) as f64) as usize;
        let u = (z - self.centers[nearest]) / self.width;
        let peak = (-0.5 * u * u).exp();
        if peak < WEIGHT_CUTOFF {
            return;
        }
        visit(nearest, peak);

        let mut psi = peak;
        let mut ratio = (u * step - half_step_sq).exp();
        for m in nearest + 1..count {
            psi *= ratio;
            if psi < WEIGHT_CUTOFF {
                break;
            }
            visit(m, psi);
            ratio *= self.decay;
        }

        let mut psi = peak;
        let mut ratio = (-u * step - half_step_sq).exp();
        for m in (0..nearest).rev() {
            psi *= ratio;
            if psi < WEIGHT_CUTOFF {
                break;
            }
            visit(m, psi);
            ratio *= self.decay;
        }
    }

    /// Kernel weights of every model at `z`, in center order.
    pub fn weights(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.visit_weights(z, |m, psi| out[m] = psi);
        out
    }

    /// Normalized weighted average of the local rates at `z`.
    #[inline]
    pub fn predict_rate(&self, z: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        let rates = &self.rates;
        self.visit_weights(z, |m, psi| {
            num += psi * rates[m];
            den += psi;
        });
        num / (den + DENOMINATOR_FLOOR)
    }

    pub fn predict_rates(&self, grad: &[f64]) -> Vec<f64> {
        grad.iter().map(|&z| self.predict_rate(z)).collect()
    }

    pub fn predict_rates_into(&self, grad: &[f64], out: &mut [f64]) -> Result<()> {
        if grad.len() != out.len() {
            return Err(Error::LengthMismatch {
                context: "predict_rates output",
                expected: grad.len(),
                actual: out.len(),
            });
        }
        for (o, &z) in out.iter_mut().zip(grad) {
            *o = self.predict_rate(z);
        }
        Ok(())
    }

    /// Coordinate-averaged update signal per local model. The kernel is
    /// evaluated at the previous gradient, the one whose rate produced the
    /// current outcome.
    pub fn pooled_signal(
        &self,
        prev: &[f64],
        curr: &[f64],
        rule: SignalRule,
    ) -> Result<MemorySignal> {
        if prev.len() != curr.len() {
            return Err(Error::LengthMismatch {
                context: "pooled_signal",
                expected: prev.len(),
                actual: curr.len(),
            });
        }
        let mut acc = vec![0.0; self.len()];
        if prev.is_empty() {
            return Ok(MemorySignal(acc));
        }
        for (&zp, &zc) in prev.iter().zip(curr) {
            let product = rule.apply(zc * zp);
            if product == 0.0 || product.is_nan() {
                continue;
            }
            self.visit_weights(zp, |m, psi| acc[m] += product * psi);
        }
        let scale = 1.0 / prev.len() as f64;
        for a in &mut acc {
            *a *= scale;
        }
        Ok(MemorySignal(acc))
    }

    /// `theta_m <- clamp(theta_m + delta_m, 0, rate_max)`. Constant local
    /// models have unit derivative in their parameter, so the provider's
    /// delta is applied directly.
    pub fn apply_update(
        &mut self,
        signal: &MemorySignal,
        provider: &mut impl DeltaProvider,
    ) -> Result<()> {
        if signal.len() != self.len() {
            return Err(Error::LengthMismatch {
                context: "memory signal",
                expected: self.len(),
                actual: signal.len(),
            });
        }
        let deltas = provider.deltas(signal);
        if deltas.len() != self.len() {
            return Err(Error::LengthMismatch {
                context: "memory deltas",
                expected: self.len(),
                actual: deltas.len(),
            });
        }
        for (theta, d) in self.rates.iter_mut().zip(deltas) {
            if d.is_finite() {
                *theta = (*theta + d).clamp(0.0, self.rate_max);
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> MemorySnapshot {
        MemorySnapshot {
            version: SNAPSHOT_VERSION,
            count: self.len(),
            clip_bound: self.clip_bound,
            eta_init: self.eta_init,
            overlap: self.overlap,
            rate_max: self.rate_max,
            theta: self.rates.clone(),
        }
    }

    pub fn restore(snapshot: &MemorySnapshot) -> Result<Self> {
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                found: snapshot.version,
                supported: SNAPSHOT_VERSION,
            });
        }
        if snapshot.theta.len() != snapshot.count {
            return Err(Error::MalformedSnapshot(format!(
                "M = {} but theta has {} entries",
                snapshot.count,
                snapshot.theta.len()
            )));
        }
        if let Some(bad) = snapshot.theta.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::MalformedSnapshot(format!(
                "rates must be finite and non-negative, found {bad}"
            )));
        }
        Self::build(
            snapshot.count,
            snapshot.clip_bound,
            snapshot.eta_init,
            snapshot.overlap,
            snapshot.rate_max,
            snapshot.theta.clone(),
        )
    }
}

/// Serializable image of a [`LearningRateMemory`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySnapshot {
    pub version: u32,
    #[serde(rename = "M")]
    pub count: usize,
    pub clip_bound: f64,
    pub eta_init: f64,
    pub overlap: f64,
    #[serde(default = "default_rate_max")]
    pub rate_max: f64,
    pub theta: Vec<f64>,
}

fn default_rate_max() -> f64 {
    DEFAULT_RATE_MAX
}

impl MemorySnapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedSnapshot(e.to_string()))
    }
}

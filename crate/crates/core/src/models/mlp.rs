//! Fully connected ReLU network with hand-derived backpropagation.
//!
//! Each layer is one parameter group named `layer{i}`, laid out as the
//! row-major `(out x in)` weight matrix followed by the `out` biases.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    /// Drop probability applied to the last hidden layer during training.
    #[serde(default)]
    pub dropout: Option<f64>,
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        MlpSpec {
            input,
            hidden: hidden.to_vec(),
            output,
            dropout: None,
        }
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout = Some(p);
        self
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(self.input);
        d.extend_from_slice(&self.hidden);
        d.push(self.output);
        d
    }

    pub fn layer_count(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn parameter_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims().contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "zero-sized layer in network {:?}",
                self.dims()
            )));
        }
        if let Some(p) = self.dropout {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "dropout probability must lie in [0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SoftmaxCrossEntropy,
    MeanSquaredError,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    /// Row-major `(n x output)` regression targets.
    Values(Vec<f64>),
}

/// Row-major `(n x dim)` inputs with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub dim: usize,
    pub targets: Targets,
}

impl Batch {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.inputs.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Training mode draws dropout masks from the given generator; evaluation
/// mode is deterministic.
pub enum Mode<'a> {
    Train(&'a mut dyn RngCore),
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    spec: MlpSpec,
    params: ParamSet,
}

struct Forward {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Vec<f64>>,
    /// ReLU outputs of each hidden layer, before dropout.
    relu: Vec<Vec<f64>>,
    mask: Option<Vec<f64>>,
    output: Vec<f64>,
}

pub(crate) fn layer_name(i: usize) -> String {
    format!("layer{i}")
}

impl MlpNetwork {
    /// He-normal weights, zero biases.
    pub fn init(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (i, w) in spec.dims().windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut values: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| normal.sample(&mut rng))
                .collect();
            values.resize(fan_in * fan_out + fan_out, 0.0);
            params.push(layer_name(i), values);
        }
        Ok(MlpNetwork { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: ParamSet) -> Result<Self> {
        spec.validate()?;
        let dims = spec.dims();
        if params.len() != spec.layer_count() {
            return Err(Error::LengthMismatch {
                context: "network layer count",
                expected: spec.layer_count(),
                actual: params.len(),
            });
        }
        for (i, (g, w)) in params.groups().iter().zip(dims.windows(2)).enumerate() {
            if g.name != layer_name(i) {
                return Err(Error::UnknownGroup(g.name.clone()));
            }
            if g.values.len() != w[0] * w[1] + w[1] {
                return Err(Error::LengthMismatch {
                    context: "layer parameter count",
                    expected: w[0] * w[1] + w[1],
                    actual: g.values.len(),
                });
            }
        }
        Ok(MlpNetwork { spec, params })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    fn check_inputs(&self, inputs: &[f64], dim: usize) -> Result<usize> {
        if dim != self.spec.input {
            return Err(Error::LengthMismatch {
                context: "input feature dimension",
                expected: self.spec.input,
                actual: dim,
            });
        }
        if inputs.is_empty() || inputs.len() % dim != 0 {
            return Err(Error::Dataset(format!(
                "input buffer of length {} is not a non-empty multiple of {dim}",
                inputs.len()
            )));
        }
        if !self.params.is_finite() {
            return Err(Error::Diverged("parameters"));
        }
        Ok(inputs.len() / dim)
    }

    fn forward(&self, x: &[f64], n: usize, mut rng: Option<&mut dyn RngCore>) -> Forward {
        let dims = self.spec.dims();
        let layers = self.spec.layer_count();
        let mut inputs = vec![x.to_vec()];
        let mut relu = Vec::with_capacity(layers - 1);
        let mut mask = None;
        let mut output = Vec::new();
        for l in 0..layers {
            let (din, dout) = (dims[l], dims[l + 1]);
            let group = &self.params.groups()[l].values;
            let (w, b) = group.split_at(din * dout);
            let a = &inputs[l];
            let mut z = vec![0.0; n * dout];
            for i in 0..n {
                let row = &a[i * din..(i + 1) * din];
                for o in 0..dout {
                    let wr = &w[o * din..(o + 1) * din];
                    z[i * dout + o] = b[o] + wr.iter().zip(row).map(|(p, q)| p * q).sum::<f64>();
                }
            }
            if l + 1 == layers {
                output = z;
                break;
            }
            for v in &mut z {
                *v = v.max(0.0);
            }
            let mut next = z.clone();
            if l + 2 == layers {
                if let (Some(p), Some(rng)) = (self.spec.dropout, rng.as_deref_mut()) {
                    if p > 0.0 {
                        let keep = 1.0 / (1.0 - p);
                        let m: Vec<f64> = (0..next.len())
                            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                            .collect();
                        for (v, s) in next.iter_mut().zip(&m) {
                            *v *= s;
                        }
                        mask = Some(m);
                    }
                }
            }
            relu.push(z);
            inputs.push(next);
        }
        Forward {
            inputs,
            relu,
            mask,
            output,
        }
    }

    /// Mean batch loss and its gradient for every layer group.
    pub fn loss_and_grad(
        &self,
        batch: &Batch,
        loss: LossKind,
        mode: Mode<'_>,
    ) -> Result<(f64, ParamSet)> {
        let n = self.check_inputs(&batch.inputs, batch.dim)?;
        let rng = match mode {
            Mode::Train(rng) => Some(rng),
            Mode::Eval => None,
        };
        let fwd = self.forward(&batch.inputs, n, rng);
        let (value, mut delta) = self.output_loss(&fwd.output, n, &batch.targets, loss)?;
        if !value.is_finite() {
            return Err(Error::Diverged("loss"));
        }

        let dims = self.spec.dims();
        let layers = self.spec.layer_count();
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); layers];
        for l in (0..layers).rev() {
            let (din, dout) = (dims[l], dims[l + 1]);
            let a = &fwd.inputs[l];
            let mut g = vec![0.0; din * dout + dout];
            {
                let (gw, gb) = g.split_at_mut(din * dout);
                for i in 0..n {
                    let row = &a[i * din..(i + 1) * din];
                    for o in 0..dout {
                        let d = delta[i * dout + o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        for (gwk, ak) in gw[o * din..(o + 1) * din].iter_mut().zip(row) {
                            *gwk += d * ak;
                        }
                    }
                }
            }
            grads[l] = g;
            if l == 0 {
                break;
            }
            let w = &self.params.groups()[l].values[..din * dout];
            let mut prev = vec![0.0; n * din];
            for i in 0..n {
                let pr = &mut prev[i * din..(i + 1) * din];
                for o in 0..dout {
                    let d = delta[i * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, wk) in pr.iter_mut().zip(&w[o * din..(o + 1) * din]) {
                        *p += d * wk;
                    }
                }
            }
            if l == layers - 1 {
                if let Some(mask) = &fwd.mask {
                    for (p, s) in prev.iter_mut().zip(mask) {
                        *p *= s;
                    }
                }
            }
            for (p, r) in prev.iter_mut().zip(&fwd.relu[l - 1]) {
                if *r <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }

        let mut out = ParamSet::new();
        for (i, g) in grads.into_iter().enumerate() {
            out.push(layer_name(i), g);
        }
        Ok((value, out))
    }

    fn output_loss(
        &self,
        output: &[f64],
        n: usize,
        targets: &Targets,
        loss: LossKind,
    ) -> Result<(f64, Vec<f64>)> {
        let k = self.spec.output;
        match (loss, targets) {
            (LossKind::SoftmaxCrossEntropy, Targets::Classes(labels)) => {
                if labels.len() != n {
                    return Err(Error::LengthMismatch {
                        context: "class labels",
                        expected: n,
                        actual: labels.len(),
                    });
                }
                let mut delta = vec![0.0; n * k];
                let mut total = 0.0;
                for (i, &y) in labels.iter().enumerate() {
                    if y >= k {
                        return Err(Error::Dataset(format!(
                            "label {y} out of range for {k} outputs"
                        )));
                    }
                    let logits = &output[i * k..(i + 1) * k];
                    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                    let lse = max + sum.ln();
                    total += lse - logits[y];
                    for c in 0..k {
                        let p = (logits[c] - lse).exp();
                        delta[i * k + c] = (p - if c == y { 1.0 } else { 0.0 }) / n as f64;
                    }
                }
                Ok((total / n as f64, delta))
            }
            (LossKind::MeanSquaredError, Targets::Values(values)) => {
                if values.len() != n * k {
                    return Err(Error::LengthMismatch {
                        context: "regression targets",
                        expected: n * k,
                        actual: values.len(),
                    });
                }
                let scale = 1.0 / (n * k) as f64;
                let mut total = 0.0;
                let delta = output
                    .iter()
                    .zip(values)
                    .map(|(o, y)| {
                        let r = o - y;
                        total += r * r;
                        2.0 * r * scale
                    })
                    .collect();
                Ok((total * scale, delta))
            }
            _ => Err(Error::Dataset(format!(
                "loss {loss:?} does not match the target kind"
            ))),
        }
    }

    /// Evaluation-mode forward pass; returns row-major `(n x output)`.
    pub fn predict(&self, inputs: &[f64], dim: usize) -> Result<Vec<f64>> {
        let n = self.check_inputs(inputs, dim)?;
        Ok(self.forward(inputs, n, None).output)
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::models::{Batch, Targets};

use super::idx::IdxTensor;

/// Row-major features in `[0, 1]` with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::Dataset(format!(
                "{} features do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(LabeledDataset {
            features,
            dim,
            labels,
        })
    }

    pub fn from_idx(images: &IdxTensor, labels: &IdxTensor) -> Result<Self> {
        if labels.dims.len() != 1 {
            return Err(Error::Dataset(format!(
                "label tensor must be one-dimensional, got dims {:?}",
                labels.dims
            )));
        }
        if images.items() != labels.items() {
            return Err(Error::Dataset(format!(
                "{} images but {} labels",
                images.items(),
                labels.items()
            )));
        }
        let labels = labels
            .values
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(Error::Dataset(format!("invalid label {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(images.unit_scaled()?, images.item_size(), labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Keeps only rows of `class_a` and `class_b`, relabeled 0 and 1, in
    /// their original order.
    pub fn binary_task(&self, class_a: usize, class_b: usize) -> Result<LabeledDataset> {
        if class_a == class_b {
            return Err(Error::Dataset("binary task needs two distinct classes".into()));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, &y) in self.labels.iter().enumerate() {
            let mapped = if y == class_a {
                0
            } else if y == class_b {
                1
            } else {
                continue;
            };
            features.extend_from_slice(self.row(i));
            labels.push(mapped);
        }
        for (class, label) in [(class_a, 0), (class_b, 1)] {
            if !labels.contains(&label) {
                return Err(Error::Dataset(format!("class {class} has no samples")));
            }
        }
        LabeledDataset::new(features, self.dim, labels)
    }

    pub fn to_batch(&self) -> Batch {
        Batch {
            inputs: self.features.clone(),
            dim: self.dim,
            targets: Targets::Classes(self.labels.clone()),
        }
    }

    pub fn batch_of(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
        }
        Batch {
            inputs,
            dim: self.dim,
            targets: Targets::Classes(indices.iter().map(|&i| self.labels[i]).collect()),
        }
    }
}

/// Ten classes of noisy `side x side` stroke images, `per_class` each,
/// interleaved by class. Every class has a fixed prototype built from a few
/// Gaussian blobs; samples jitter the prototype's intensity, blend in a bit
/// of a random other prototype, and add pixel noise.
pub fn synthetic_digits(per_class: usize, side: usize, seed: u64) -> Result<LabeledDataset> {
    if per_class == 0 || side < 2 {
        return Err(Error::Dataset(
            "synthetic digits need per_class >= 1 and side >= 2".into(),
        ));
    }
    const CLASSES: usize = 10;
    const BLOBS: usize = 4;
    const BLEND: f64 = 0.35;
    const NOISE: f64 = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = side * side;
    let s = side as f64;
    let prototypes: Vec<Vec<f64>> = (0..CLASSES)
        .map(|_| {
            let blobs: Vec<(f64, f64, f64)> = (0..BLOBS)
                .map(|_| {
                    (
                        rng.random_range(0.15..0.85) * s,
                        rng.random_range(0.15..0.85) * s,
                        rng.random_range(0.08..0.18) * s,
                    )
                })
                .collect();
            (0..dim)
                .map(|p| {
                    let (r, c) = ((p / side) as f64, (p % side) as f64);
                    let v: f64 = blobs
                        .iter()
                        .map(|&(br, bc, w)| {
                            let d2 = (r - br).powi(2) + (c - bc).powi(2);
                            (-0.5 * d2 / (w * w)).exp()
                        })
                        .sum();
                    v.min(1.0)
                })
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, NOISE).expect("valid");
    let mut features = Vec::with_capacity(CLASSES * per_class * dim);
    let mut labels = Vec::with_capacity(CLASSES * per_class);
    for _ in 0..per_class {
        for (class, proto) in prototypes.iter().enumerate() {
            let other = &prototypes[rng.random_range(0..CLASSES)];
            let gain = rng.random_range(0.7..1.0);
            for (p, o) in proto.iter().zip(other) {
                let v = gain * ((1.0 - BLEND) * p + BLEND * o) + noise.sample(&mut rng);
                features.push(v.clamp(0.0, 1.0));
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(features, dim, labels)
}

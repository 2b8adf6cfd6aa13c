//! Synthetic stand-in for joint-space inverse dynamics recordings.
//!
//! Seven joints repeat a smooth periodic motion (a one-second lifting cycle
//! built from the first three harmonics); inputs are `(q, q_dot, q_ddot)`
//! sampled at 1 kHz with small sensor noise. The torque
//! target is a fixed nonlinear function of the state sitting on an offset of
//! roughly 32, plus a payload term that depends on the variant. All constants
//! below are part of the stream definition; bump [`GENERATOR_VERSION`] when
//! changing any of them.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Batch, Targets};

pub const GENERATOR_VERSION: u32 = 1;
pub const JOINTS: usize = 7;
pub const INPUT_DIM: usize = 3 * JOINTS;
pub const SAMPLE_PERIOD_MS: f64 = 1.0;

const HARMONICS: usize = 3;
const CYCLE_S: f64 = 1.0;
/// Amplitude range of the first harmonic; harmonic `k` is scaled by `1/k`.
const AMPLITUDE: (f64, f64) = (0.1, 0.4);
const JOINT_BIAS: (f64, f64) = (-0.6, 0.6);
const NOISE_Q: f64 = 0.002;
const NOISE_QD: f64 = 0.01;
const NOISE_QDD: f64 = 0.05;
const NOISE_TAU: f64 = 0.05;

const TORQUE_OFFSET: f64 = 32.0;
const PAYLOAD_GRAVITY: f64 = 3.0;
const PAYLOAD_OFFSET: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    None,
    Light,
    Heavy,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::None, Variant::Light, Variant::Heavy];

    /// Payload mass in arbitrary units.
    pub fn mass(self) -> f64 {
        match self {
            Variant::None => 0.0,
            Variant::Light => 0.5,
            Variant::Heavy => 1.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::Light => "light",
            Variant::Heavy => "heavy",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Variant::None),
            "light" => Ok(Variant::Light),
            "heavy" => Ok(Variant::Heavy),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsStream {
    /// Row-major `(n x 21)`: positions, velocities, accelerations.
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub variant: Variant,
    pub seed: u64,
    pub period_ms: f64,
}

impl DynamicsStream {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * INPUT_DIM..(i + 1) * INPUT_DIM]
    }

    pub fn batch(&self, range: std::ops::Range<usize>) -> Batch {
        Batch {
            inputs: self.inputs[range.start * INPUT_DIM..range.end * INPUT_DIM].to_vec(),
            dim: INPUT_DIM,
            targets: Targets::Values(self.targets[range].to_vec()),
        }
    }

    pub fn mean_target(&self) -> f64 {
        self.targets.iter().sum::<f64>() / self.len().max(1) as f64
    }
}

fn payload(variant: Variant, q: &[f64]) -> f64 {
    variant.mass() * (PAYLOAD_OFFSET + PAYLOAD_GRAVITY * q[1].cos() + 0.5 * (q[1] + q[3]).sin())
}

fn base_torque(q: &[f64], qd: &[f64], qdd: &[f64]) -> f64 {
    TORQUE_OFFSET + 2.0 * q[0].sin() * q[1].cos() + 1.2 * (q[1] + q[2]).sin()
        - 0.8 * q[3].cos()
        + 0.02 * qdd[0]
        + 0.01 * qdd[1]
        + 0.05 * qd[0] * qd[1]
        - 0.1 * qd[0]
        + 0.1 * (q[4] * q[5]).tanh()
}

pub fn synth_dynamics_stream(variant: Variant, n_samples: usize, seed: u64) -> Result<DynamicsStream> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("stream needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    struct Harmonic {
        amp: f64,
        omega: f64,
        phase: f64,
    }
    let joints: Vec<(f64, Vec<Harmonic>)> = (0..JOINTS)
        .map(|_| {
            let bias = rng.random_range(JOINT_BIAS.0..JOINT_BIAS.1);
            let hs = (1..=HARMONICS)
                .map(|k| Harmonic {
                    amp: rng.random_range(AMPLITUDE.0..AMPLITUDE.1) / k as f64,
                    omega: TAU * k as f64 / CYCLE_S,
                    phase: rng.random_range(0.0..TAU),
                })
                .collect();
            (bias, hs)
        })
        .collect();

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let nq = Normal::new(0.0, NOISE_Q).expect("valid");
    let nqd = Normal::new(0.0, NOISE_QD).expect("valid");
    let nqdd = Normal::new(0.0, NOISE_QDD).expect("valid");
    let ntau = Normal::new(0.0, NOISE_TAU).expect("valid");

    let mut inputs = Vec::with_capacity(n_samples * INPUT_DIM);
    let mut targets = Vec::with_capacity(n_samples);
    let (mut q, mut qd, mut qdd) = ([0.0; JOINTS], [0.0; JOINTS], [0.0; JOINTS]);
    for i in 0..n_samples {
        let t = i as f64 * SAMPLE_PERIOD_MS * 1e-3;
        for (j, (bias, hs)) in joints.iter().enumerate() {
            let (mut p, mut v, mut a) = (*bias, 0.0, 0.0);
            for h in hs {
                let arg = h.omega * t + h.phase;
                p += h.amp * arg.sin();
                v += h.amp * h.omega * arg.cos();
                a -= h.amp * h.omega * h.omega * arg.sin();
            }
            q[j] = p;
            qd[j] = v;
            qdd[j] = a;
        }
        let tau = base_torque(&q, &qd, &qdd) + payload(variant, &q) + ntau.sample(&mut noise_rng);
        for j in 0..JOINTS {
            inputs.push(q[j] + nq.sample(&mut noise_rng));
        }
        for j in 0..JOINTS {
            inputs.push(qd[j] + nqd.sample(&mut noise_rng));
        }
        for j in 0..JOINTS {
            inputs.push(qdd[j] + nqdd.sample(&mut noise_rng));
        }
        targets.push(tau);
    }
    Ok(DynamicsStream {
        inputs,
        targets,
        variant,
        seed,
        period_ms: SAMPLE_PERIOD_MS,
    })
}

/// Per-coordinate affine map fitted on one stream and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(stream: &DynamicsStream) -> Self {
        let n = stream.len().max(1) as f64;
        let mut mean = vec![0.0; INPUT_DIM];
        for i in 0..stream.len() {
            for (m, x) in mean.iter_mut().zip(stream.row(i)) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; INPUT_DIM];
        for i in 0..stream.len() {
            for ((v, x), m) in var.iter_mut().zip(stream.row(i)).zip(&mean) {
                *v += (x - m).powi(2) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-24 { 1.0 / v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, stream: &DynamicsStream) -> DynamicsStream {
        let mut out = stream.clone();
        for row in out.inputs.chunks_exact_mut(INPUT_DIM) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *x = (*x - m) * s;
            }
        }
        out
    }
}

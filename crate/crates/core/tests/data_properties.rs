mod common;

use common::*;
use lrmem::data::{
    sequential_batches, synth_dynamics_stream, synthetic_digits, IdxElement, IdxTensor,
    LabeledDataset, Standardizer, Variant,
};
use lrmem::models::{LossKind, MlpNetwork, MlpSpec, Mode};
use proptest::prelude::*;

fn element() -> impl Strategy<Value = IdxElement> {
    prop_oneof![
        Just(IdxElement::U8),
        Just(IdxElement::I8),
        Just(IdxElement::I16),
        Just(IdxElement::I32),
        Just(IdxElement::F32),
        Just(IdxElement::F64),
    ]
}

fn tensor() -> impl Strategy<Value = IdxTensor> {
    (element(), prop::collection::vec(1usize..5, 1..4)).prop_flat_map(|(element, dims)| {
        let n: usize = dims.iter().product();
        prop::collection::vec(any::<u32>(), n).prop_map(move |raw| {
            let values = raw
                .iter()
                .map(|&r| match element {
                    IdxElement::U8 => (r % 256) as f64,
                    IdxElement::I8 => (r % 256) as f64 - 128.0,
                    IdxElement::I16 => (r % 65536) as f64 - 32768.0,
                    IdxElement::I32 => r as i32 as f64,
                    IdxElement::F32 => f32::from_bits(r & 0x7F7F_FFFF) as f64,
                    IdxElement::F64 => r as f64 / 7.0 - 1e5,
                })
                .collect();
            IdxTensor { dims: dims.clone(), element, values }
        })
    })
}

proptest! {
    #[test]
    fn idx_round_trips(t in tensor()) {
        prop_assert_eq!(check_idx_round_trip(&t), Ok(()));
    }

    #[test]
    fn image_features_are_unit_scaled(pixels in prop::collection::vec(0u8..=255, 12..48)) {
        let n = pixels.len() / 4;
        let images = IdxTensor {
            dims: vec![n, 2, 2],
            element: IdxElement::U8,
            values: pixels[..n * 4].iter().map(|&p| p as f64).collect(),
        };
        let labels = IdxTensor { dims: vec![n], element: IdxElement::U8, values: vec![3.0; n] };
        let ds = LabeledDataset::from_idx(&images, &labels).unwrap();
        prop_assert!(ds.features.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn batches_cover_once(len in 1usize..500, b in 1usize..64) {
        prop_assert_eq!(check_batch_coverage(len, b), Ok(()));
    }
}

#[test]
fn synthetic_digits_are_unit_scaled_and_deterministic() {
    let a = synthetic_digits(5, 8, 2).unwrap();
    assert!(a.features.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(a, synthetic_digits(5, 8, 2).unwrap());
    assert_ne!(a, synthetic_digits(5, 8, 3).unwrap());
}

#[test]
fn streams_are_deterministic_and_bounded() {
    for v in Variant::ALL {
        let a = synth_dynamics_stream(v, 3000, 4).unwrap();
        assert_eq!(a, synth_dynamics_stream(v, 3000, 4).unwrap());
        assert_ne!(a, synth_dynamics_stream(v, 3000, 5).unwrap());
        assert_eq!(a.len(), 3000);
        assert!(a.inputs.iter().all(|x| x.is_finite() && x.abs() < 100.0));
        let flat: Vec<usize> = sequential_batches(a.len(), 10).flat_map(|r| r.clone()).collect();
        assert_eq!(flat, (0..3000).collect::<Vec<_>>());
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn consecutive_batch_gradients_are_correlated() {
    for seed in 0..6u64 {
        let base = synth_dynamics_stream(Variant::None, 400, seed).unwrap();
        let scaler = Standardizer::fit(&base);
        let net = MlpNetwork::init(MlpSpec::new(21, &[100, 50, 10], 1), seed).unwrap();
        for v in Variant::ALL {
            let s = scaler.apply(&synth_dynamics_stream(v, 400, seed).unwrap());
            let grads: Vec<Vec<f64>> = sequential_batches(s.len(), 10)
                .map(|r| {
                    let (_, g) = net.loss_and_grad(&s.batch(r), LossKind::MeanSquaredError, Mode::Eval).unwrap();
                    g.flatten()
                })
                .collect();
            let mean: f64 = grads.windows(2).map(|w| cosine(&w[0], &w[1])).sum::<f64>() / (grads.len() - 1) as f64;
            assert!(mean > 0.5, "seed {seed} {}: mean cosine {mean}", v.label());
        }
    }
}

//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use lrmem::data::{synth_dynamics_stream, IdxElement, IdxTensor, Variant};
use lrmem::harness::suites::{
    classification_settings, classification_sweep, dynamics_settings, dynamics_table,
    rosenbrock_plan, rosenbrock_settings, threshold_steps, CLASSIFICATION_RATES, DYNAMICS_RATES,
    DYNAMICS_SAMPLES,
};
use lrmem::harness::{run_experiment, timing_probe, DataSource, OptimizerKind, TimingConfig, Transfer};
use lrmem::models::{Batch, LossKind, MlpNetwork, MlpSpec, Mode, Objective, Rosenbrock, Targets};
use lrmem::optim::{GradientDescent, MetaConfig, MetaOptimizer, Optimizer};
use lrmem::{GroupShape, LearningRateMemory, ParamSet, SignalRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn from_check(r: Result<String, String>) -> Verdict {
    match r {
        Ok(d) => verdict(true, d),
        Err(e) => verdict(false, e),
    }
}

fn rosenbrock_ordering() -> Verdict {
    let t = Instant::now();
    let steps = |kind, runs| {
        let report = run_experiment(&rosenbrock_plan(rosenbrock_settings(kind), runs)).unwrap();
        threshold_steps(&report, 0)
    };
    let gd = steps(OptimizerKind::Gd, 1)[0];
    let meta = steps(OptimizerKind::MetaGd, 2);
    let secs = t.elapsed().as_secs_f64();
    let ok = match (meta[1], meta[0], gd) {
        (Some(r2), Some(r1), Some(g)) => r2 < r1 && r1 < g,
        (Some(r2), Some(r1), None) => r2 < r1,
        _ => false,
    };
    verdict(
        ok && secs < 10.0,
        format!("run2 {:?} < run1 {:?} < GD {:?} steps to 1e-2, {secs:.2} s (limit 10 s)", meta[1], meta[0], gd),
    )
}

fn max_deviation(mut a: impl Optimizer, mut b: impl Optimizer, start: ParamSet, mut f: impl FnMut(&ParamSet) -> ParamSet) -> f64 {
    let (mut pa, mut pb) = (start.clone(), start);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (ga, gb) = (f(&pa), f(&pb));
        a.step(&mut pa, &ga).unwrap();
        b.step(&mut pb, &gb).unwrap();
        worst = worst.max(pa.max_abs_diff(&pb));
    }
    worst
}

fn gd_equivalence() -> Verdict {
    let frozen = |eta, clip| MetaConfig { update_memory: false, ..MetaConfig::meta_gd(100, eta, 0.005, clip) };
    let start = Rosenbrock::params(-1.2, 1.0);
    let mut f = Rosenbrock::default();
    let ros = max_deviation(
        MetaOptimizer::new(frozen(0.001, 10.0), &start.shapes()).unwrap(),
        GradientDescent::new(0.001, 10.0),
        start,
        |p| f.loss_and_grad(p).unwrap().1,
    );
    let net = MlpNetwork::init(MlpSpec::new(4, &[5], 2), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch = Batch {
        inputs: (0..32).map(|_| rng.random_range(-1.0..1.0)).collect(),
        dim: 4,
        targets: Targets::Classes((0..8).map(|i| i % 2).collect()),
    };
    let spec = net.spec().clone();
    let mlp = max_deviation(
        MetaOptimizer::new(frozen(0.05, 1.0), &net.params().shapes()).unwrap(),
        GradientDescent::new(0.05, 1.0),
        net.params().clone(),
        |p| {
            MlpNetwork::from_params(spec.clone(), p.clone())
                .unwrap()
                .loss_and_grad(&batch, LossKind::SoftmaxCrossEntropy, Mode::Eval)
                .unwrap()
                .1
        },
    );
    verdict(ros < 1e-12 && mlp < 1e-12, format!("max deviation Rosenbrock {ros:e}, MLP {mlp:e} over 100 steps (limit 1e-12)"))
}

fn reference_oracle() -> Verdict {
    let expected = reference_quadratic(1.0, 0.1, 0.05, 10, 10.0, 1.0, 20);
    let shapes = [GroupShape { name: "w".into(), dim: 1 }];
    let mut opt = MetaOptimizer::new(MetaConfig::meta_gd(10, 0.1, 0.05, 10.0), &shapes).unwrap();
    let mut p = ParamSet::new().with("w", vec![1.0]);
    let mut worst: f64 = 0.0;
    for want in expected {
        let g = p.clone();
        opt.step(&mut p, &g).unwrap();
        worst = worst.max((p.groups()[0].values[0] - want).abs());
    }
    verdict(worst < 1e-12, format!("max deviation {worst:e} over 20 steps (limit 1e-12)"))
}

fn gradient_checks() -> Verdict {
    from_check((|| {
        let mut instances = 0;
        for seed in 0..40u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let loss = if seed % 2 == 0 { LossKind::SoftmaxCrossEntropy } else { LossKind::MeanSquaredError };
            let (input, output, n) = (rng.random_range(1..6), rng.random_range(2..4), rng.random_range(1..6));
            let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(2..7)).collect();
            let mut net = MlpNetwork::init(MlpSpec::new(input, &hidden, output), seed).map_err(|e| e.to_string())?;
            // Keep pre-activations off the ReLU kink.
            for g in net.params_mut().groups_mut() {
                g.values.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
            }
            let targets = match loss {
                LossKind::SoftmaxCrossEntropy => Targets::Classes((0..n).map(|_| rng.random_range(0..output)).collect()),
                LossKind::MeanSquaredError => Targets::Values((0..n * output).map(|_| rng.random_range(-3.0..3.0)).collect()),
            };
            let batch = Batch { inputs: (0..n * input).map(|_| rng.random_range(-2.0..2.0)).collect(), dim: input, targets };
            let eval = |p: &ParamSet| {
                MlpNetwork::from_params(net.spec().clone(), p.clone())
                    .unwrap()
                    .loss_and_grad(&batch, loss, Mode::Eval)
                    .unwrap()
            };
            let numeric = numeric_gradient(net.params(), 1e-5, |p| eval(p).0);
            compare_gradients(&eval(net.params()).1.flatten(), &numeric, 1e-4, 1e-7)?;
            instances += 1;
        }
        let mut f = Rosenbrock::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let p = Rosenbrock::params(rng.random_range(-2.0..2.0), rng.random_range(-1.0..3.0));
            let numeric = numeric_gradient(&p, 1e-5, |q| f.loss_and_grad(q).unwrap().0);
            compare_gradients(&f.loss_and_grad(&p).unwrap().1.flatten(), &numeric, 1e-4, 1e-7)?;
        }
        let mut derivatives = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mem = LearningRateMemory::new(rng.random_range(3..50), rng.random_range(0.5..10.0), 0.01, 1.0)
                .map_err(|e| e.to_string())?;
            let rates: Vec<f64> = (0..mem.len()).map(|_| rng.random_range(0.05..0.95)).collect();
            mem.set_rates(&rates).map_err(|e| e.to_string())?;
            let z = rng.random_range(-1.0..1.0) * mem.clip_bound();
            let w = direct_weights(&mem, z);
            let total: f64 = w.iter().sum();
            for m in (0..mem.len()).filter(|&m| w[m] / total > 1e-4) {
                check_linearity(&mem, z, m)?;
                derivatives += 1;
            }
        }
        Ok(format!("{instances} MLP instances, 20 Rosenbrock points, {derivatives} memory derivatives within 1e-4"))
    })())
}

fn classification_transfer() -> Verdict {
    let t = Instant::now();
    let sweep = classification_sweep(
        OptimizerKind::MetaGd,
        &CLASSIFICATION_RATES,
        &[0, 1, 2],
        &DataSource::default(),
        classification_settings,
    )
    .unwrap();
    let mut ordered = true;
    let mut strict = 0;
    let mut parts = Vec::new();
    for chunk in sweep.chunks(3) {
        let (gd, fresh, reload) = (&chunk[0], &chunk[1], &chunk[2]);
        assert_eq!((fresh.transfer, reload.transfer), (Transfer::Fresh, Transfer::Reload));
        ordered &= reload.later_median <= fresh.later_median && fresh.later_median <= gd.later_median;
        strict += usize::from(fresh.later_median < gd.later_median);
        parts.push(format!(
            "eta {}: {} <= {} <= {}",
            gd.eta, reload.later_median, fresh.later_median, gd.later_median
        ));
    }
    verdict(
        ordered && strict >= 2,
        format!(
            "medians transferred <= fresh <= GD [{}], fresh < GD at {strict}/3 rates, {:.1} s",
            parts.join("; "),
            t.elapsed().as_secs_f64()
        ),
    )
}

fn dynamics_orderings() -> Verdict {
    let t = Instant::now();
    let seeds: Vec<u64> = (0..10).collect();
    let kinds = [OptimizerKind::Gd, OptimizerKind::MetaGd];
    let table = dynamics_table(&DYNAMICS_RATES, &kinds, &seeds, DYNAMICS_SAMPLES, dynamics_settings).unwrap();
    let loss = |eta, kind, v, reload| {
        table.get(eta, kind, v, reload).and_then(|r| r.mean_loss_prefix).unwrap_or(f64::INFINITY)
    };
    let (mut held, mut cells) = (0, 0);
    let mut misses = Vec::new();
    let mut tally = |ok: bool, what: String| {
        cells += 1;
        if ok {
            held += 1;
        } else {
            misses.push(what);
        }
    };
    for &eta in &DYNAMICS_RATES {
        for v in [Variant::Light, Variant::Heavy] {
            if eta < 0.01 {
                let (m, g) = (loss(eta, OptimizerKind::MetaGd, v, true), loss(eta, OptimizerKind::Gd, v, true));
                tally(m <= g, format!("MetaGD-reload {m:.3} > GD-reload {g:.3} at eta {eta} {}", v.label()));
            }
            for kind in kinds {
                let (r, n) = (loss(eta, kind, v, true), loss(eta, kind, v, false));
                tally(r <= n, format!("{} reload {r:.3} > noreload {n:.3} at eta {eta} {}", kind.label(), v.label()));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let share = held as f64 / cells as f64;
    verdict(
        share >= 0.8 && secs < 300.0,
        format!(
            "{held}/{cells} cells ({:.1}%, need 80%), {secs:.1} s (limit 300 s); misses: {}",
            100.0 * share,
            if misses.is_empty() { "none".into() } else { misses.join("; ") }
        ),
    )
}

fn timing() -> Verdict {
    let probe = |kind, hidden: &[usize], m| {
        timing_probe(&TimingConfig { kind, hidden: hidden.to_vec(), memory_size: m, ..TimingConfig::default() }).unwrap()
    };
    let base = probe(OptimizerKind::MetaGd, &[100, 50, 10], 200);
    let double_m = probe(OptimizerKind::MetaGd, &[100, 50, 10], 400);
    let double_p = probe(OptimizerKind::MetaGd, &[160, 69, 12], 200);
    let gd = probe(OptimizerKind::Gd, &[100, 50, 10], 200);
    let rm = double_m.median_ms / base.median_ms;
    let rp = double_p.median_ms / base.median_ms;
    let pr = double_p.parameter_count as f64 / base.parameter_count as f64;
    verdict(
        rm <= 2.5 && rp <= 2.5 && gd.median_ms < base.median_ms,
        format!(
            "median {:.3} ms (advisory reference 3 ms); M x2 -> {rm:.2}x, params x{pr:.2} -> {rp:.2}x (limit 2.5x); GD {:.4} ms",
            base.median_ms, gd.median_ms
        ),
    )
}

fn property_suites() -> Verdict {
    from_check((|| {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut cases = 0;
        for _ in 0..200 {
            let m = rng.random_range(2..80);
            let g = rng.random_range(0.1..20.0);
            let overlap = rng.random_range(0.3..3.0);
            let mut mem = LearningRateMemory::new(m, g, 0.01, overlap).map_err(|e| e.to_string())?;
            let rates: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
            mem.set_rates(&rates).map_err(|e| e.to_string())?;
            let n = rng.random_range(1..30);
            let prev: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
            let curr: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
            for rule in [SignalRule::ClippedProduct, SignalRule::Sign] {
                check_signal_bound(&mem, &prev, &curr, rule)?;
            }
            let zs: Vec<f64> = (0..8).map(|_| rng.random_range(-g..g)).collect();
            for &z in &zs {
                check_prediction_bounds(&mem, z)?;
            }
            check_fresh_constancy(m, g, rng.random_range(1e-5..1.0), overlap, &zs)?;
            check_snapshot_round_trip(&mem, &zs)?;
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let signal: Vec<f64> = (0..m).map(|_| sign * rng.random_range(0.0..1.0)).collect();
            check_monotone(&mem, &signal, rng.random_range(1e-4..1.0))?;
            check_batch_coverage(rng.random_range(1..400), rng.random_range(1..40))?;
            let items = rng.random_range(1..6);
            let t = IdxTensor {
                dims: vec![items, 3],
                element: IdxElement::U8,
                values: (0..items * 3).map(|_| rng.random_range(0..256) as f64).collect(),
            };
            check_idx_round_trip(&t)?;
            cases += 1;
        }
        let a = synth_dynamics_stream(Variant::Heavy, 500, 3).map_err(|e| e.to_string())?;
        if a != synth_dynamics_stream(Variant::Heavy, 500, 3).map_err(|e| e.to_string())? {
            return Err("stream generation is not deterministic".into());
        }
        Ok(format!("{cases} randomized cases of every memory, batch and IDX property (full suites run under cargo test)"))
    })())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("rosenbrock transfer ordering", rosenbrock_ordering),
        ("frozen memory equals gradient descent", gd_equivalence),
        ("reference transcription", reference_oracle),
        ("gradient checks", gradient_checks),
        ("classification transfer", classification_transfer),
        ("sequential dynamics orderings", dynamics_orderings),
        ("step-time scaling", timing),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        failed += usize::from(!v.pass);
        println!("criterion {}: {} {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

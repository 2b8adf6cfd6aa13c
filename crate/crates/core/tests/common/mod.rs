//! Independent oracles and property checks shared by the test targets.
#![allow(dead_code)]

use lrmem::data::{encode_idx, parse_idx, sequential_batches, BatchIterator, IdxTensor};
use lrmem::memory::{PlainStep, DENOMINATOR_FLOOR};
use lrmem::{LearningRateMemory, MemorySignal, MemorySnapshot, ParamSet, SignalRule};

pub type Check = Result<(), String>;

/// Straight-line transcription of the meta-gradient loop on `L = w^2 / 2`
/// with one scalar parameter: clip, update the memory from the product of
/// the current and previous gradient (kernel at the previous one), predict
/// the rate at the current gradient, step. Every kernel is summed in full.
pub fn reference_quadratic(
    w0: f64,
    eta: f64,
    xi: f64,
    m: usize,
    g: f64,
    overlap: f64,
    steps: usize,
) -> Vec<f64> {
    let spacing = 2.0 * g / (m as f64 - 1.0);
    let lambda = overlap * spacing;
    let centers: Vec<f64> = (0..m).map(|i| -g + i as f64 * spacing).collect();
    let psi = |z: f64, c: f64| (-0.5 * ((z - c) / lambda).powi(2)).exp();
    let mut theta = vec![eta; m];
    let mut w = w0;
    let mut z_prev = 0.0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let z = w.clamp(-g, g);
        let s = (z * z_prev).clamp(-1.0, 1.0);
        for i in 0..m {
            theta[i] = (theta[i] + xi * s * psi(z_prev, centers[i])).clamp(0.0, 1.0);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            let p = psi(z, centers[i]);
            num += p * theta[i];
            den += p;
        }
        let rate = num / (den + 1e-12);
        w -= rate * z;
        z_prev = z;
        out.push(w);
    }
    out
}

/// Kernel weights of every model, by direct summation.
pub fn direct_weights(mem: &LearningRateMemory, z: f64) -> Vec<f64> {
    mem.models().map(|m| m.kernel_weight(z)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Central finite differences of `f` over every coordinate of `params`.
pub fn numeric_gradient(params: &ParamSet, h: f64, mut f: impl FnMut(&ParamSet) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.total_len());
    let mut work = params.clone();
    for gi in 0..params.len() {
        for i in 0..params.groups()[gi].values.len() {
            let orig = work.groups()[gi].values[i];
            work.groups_mut()[gi].values[i] = orig + h;
            let up = f(&work);
            work.groups_mut()[gi].values[i] = orig - h;
            let down = f(&work);
            work.groups_mut()[gi].values[i] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// Compares analytic and numeric gradients. Coordinates whose magnitudes
/// are both below `floor` are skipped since their relative error is noise.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64], tol: f64, floor: f64) -> Check {
    if analytic.len() != numeric.len() {
        return Err(format!("length {} vs {}", analytic.len(), numeric.len()));
    }
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        if a.abs().max(n.abs()) < floor {
            continue;
        }
        let e = rel_err(*a, *n);
        if e >= tol {
            return Err(format!("coordinate {i}: analytic {a} numeric {n} rel err {e:e}"));
        }
    }
    Ok(())
}

pub fn check_signal_bound(mem: &LearningRateMemory, prev: &[f64], curr: &[f64], rule: SignalRule) -> Check {
    let s = mem.pooled_signal(prev, curr, rule).map_err(|e| e.to_string())?;
    match s.values().iter().find(|a| a.abs() > 1.0) {
        Some(a) => Err(format!("|a_m| = {} > 1", a.abs())),
        None => Ok(()),
    }
}

pub fn check_prediction_bounds(mem: &LearningRateMemory, z: f64) -> Check {
    let rates = mem.rates();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(0.0, f64::max);
    let sum: f64 = mem.weights(z).iter().sum();
    let delta = DENOMINATOR_FLOOR * hi / sum;
    let p = mem.predict_rate(z);
    let slack = 1e-15 * hi.max(1e-300);
    if p < lo - delta - slack || p > hi + delta + slack {
        return Err(format!("prediction {p} at z={z} outside [{lo}, {hi}] +- {delta}"));
    }
    Ok(())
}

pub fn check_fresh_constancy(count: usize, g: f64, eta: f64, overlap: f64, zs: &[f64]) -> Check {
    let mem = LearningRateMemory::new(count, g, eta, overlap).map_err(|e| e.to_string())?;
    for &z in zs {
        let p = mem.predict_rate(z.clamp(-g, g));
        if rel_err(p, eta) >= 1e-9 {
            return Err(format!("fresh prediction {p} != {eta} at z={z}"));
        }
    }
    Ok(())
}

/// Central difference of the prediction in one rate against the closed form.
pub fn check_linearity(mem: &LearningRateMemory, z: f64, m: usize) -> Check {
    let h = 1e-6;
    let mut up = mem.clone();
    let mut down = mem.clone();
    let mut r = mem.rates().to_vec();
    r[m] += h;
    up.set_rates(&r).map_err(|e| e.to_string())?;
    r[m] -= 2.0 * h;
    down.set_rates(&r).map_err(|e| e.to_string())?;
    let numeric = (up.predict_rate(z) - down.predict_rate(z)) / (2.0 * h);
    let w = direct_weights(mem, z);
    let analytic = w[m] / (w.iter().sum::<f64>() + DENOMINATOR_FLOOR);
    let e = rel_err(numeric, analytic);
    if e >= 1e-4 {
        return Err(format!("d pred / d theta_{m} at z={z}: numeric {numeric} closed form {analytic}"));
    }
    Ok(())
}

pub fn check_monotone(mem: &LearningRateMemory, signal: &[f64], xi: f64) -> Check {
    let mut next = mem.clone();
    next.apply_update(&MemorySignal::from_values(signal.to_vec()), &mut PlainStep(xi))
        .map_err(|e| e.to_string())?;
    let all_pos = signal.iter().all(|a| *a >= 0.0);
    let all_neg = signal.iter().all(|a| *a <= 0.0);
    for (m, (before, after)) in mem.rates().iter().zip(next.rates()).enumerate() {
        if all_pos && after < before {
            return Err(format!("positive signal decreased theta_{m}: {before} -> {after}"));
        }
        if all_neg && after > before {
            return Err(format!("negative signal increased theta_{m}: {before} -> {after}"));
        }
    }
    Ok(())
}

/// Snapshot, serialize, parse and restore; predictions must be bit-identical.
pub fn check_snapshot_round_trip(mem: &LearningRateMemory, probes: &[f64]) -> Check {
    let json = mem.snapshot().to_json().map_err(|e| e.to_string())?;
    let snap = MemorySnapshot::from_json(&json).map_err(|e| e.to_string())?;
    let back = LearningRateMemory::restore(&snap).map_err(|e| e.to_string())?;
    if &back != mem {
        return Err("restored memory differs field-for-field".into());
    }
    for &z in probes {
        let (a, b) = (mem.predict_rate(z), back.predict_rate(z));
        if a.to_bits() != b.to_bits() {
            return Err(format!("prediction at {z}: {a} vs {b}"));
        }
    }
    Ok(())
}

pub fn check_batch_coverage(len: usize, b: usize) -> Check {
    let ranges: Vec<_> = sequential_batches(len, b).collect();
    if ranges.len() != len.div_ceil(b) {
        return Err(format!("{} batches for N={len}, b={b}", ranges.len()));
    }
    let flat: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
    if flat != (0..len).collect::<Vec<_>>() {
        return Err(format!("ranges do not cover 0..{len} once in order"));
    }
    let idx: Vec<usize> = BatchIterator::sequential(len, b).flatten().collect();
    if idx != flat {
        return Err("sequential iterator differs from ranges".into());
    }
    let mut shuffled: Vec<usize> = BatchIterator::shuffled(len, b, 7).flatten().collect();
    shuffled.sort_unstable();
    if shuffled != flat {
        return Err("shuffled iterator does not visit every index once".into());
    }
    Ok(())
}

pub fn check_idx_round_trip(t: &IdxTensor) -> Check {
    let back = parse_idx(&encode_idx(t)).map_err(|e| e.to_string())?;
    if &back != t {
        return Err(format!("round trip changed tensor with dims {:?}", t.dims));
    }
    Ok(())
}

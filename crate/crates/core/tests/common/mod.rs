//! Oracles shared by the integration suites. Everything here is written
//! from the definitions, independent of the library's code paths.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repcount::data::{AnnotationTrack, EmbeddingSequence};
use repcount::matrix::Matrix;
use repcount::network::{
    evaluate_objective, forward, prepare_sample, sample_objective, AggregatorConfig, NetworkConfig,
    NetworkState, Sample, TrainConfig,
};
use repcount::similarity::{tsm_forward, SimilarityMeasure};

/// Prominence of every index that is a peak, by the literal definition:
/// a peak is the left-rounded midpoint of a maximal run of equal values
/// whose outer neighbours both exist and are strictly lower.
pub fn brute_force_peaks(x: &[f64]) -> Vec<(usize, f64, usize, usize)> {
    let n = x.len();
    let mut out = Vec::new();
    for i in 0..n {
        let mut l = i;
        while l > 0 && x[l - 1] == x[i] {
            l -= 1;
        }
        let mut r = i;
        while r + 1 < n && x[r + 1] == x[i] {
            r += 1;
        }
        if l == 0 || r == n - 1 {
            continue;
        }
        if !(x[l - 1] < x[i] && x[r + 1] < x[i]) {
            continue;
        }
        if i != (l + r) / 2 {
            continue;
        }
        let h = x[i];
        // left excursion: indices k < i until a strictly higher value
        let mut left_min = i;
        let mut k = i;
        while k > 0 {
            k -= 1;
            if x[k] > h {
                break;
            }
            if x[k] < x[left_min] {
                left_min = k;
            }
        }
        let mut right_min = i;
        let mut k = i;
        while k + 1 < n {
            k += 1;
            if x[k] > h {
                break;
            }
            if x[k] < x[right_min] {
                right_min = k;
            }
        }
        out.push((i, h - x[left_min].max(x[right_min]), left_min, right_min));
    }
    out
}

/// Random series with plateaus, repeated values and exact zeros.
pub fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let levels = rng.random_range(2..12);
    let mut v = Vec::with_capacity(len);
    while v.len() < len {
        let run = if rng.random_bool(0.2) { rng.random_range(1..5) } else { 1 };
        let val = if rng.random_bool(0.5) {
            rng.random_range(0..levels) as f64 / (levels - 1) as f64
        } else {
            rng.random_range(0.0..1.0)
        };
        for _ in 0..run {
            if v.len() < len {
                v.push(val);
            }
        }
    }
    v
}

/// Random valid annotation track over `total` frames.
pub fn random_track(rng: &mut ChaCha8Rng, total: usize) -> AnnotationTrack {
    let mut intervals = Vec::new();
    let mut t = rng.random_range(0..=total.min(4));
    while t < total {
        let len = rng.random_range(1..=8usize);
        let end = (t + len - 1).min(total - 1);
        intervals.push((t, end));
        t = end + 1 + rng.random_range(0..4);
        if rng.random_bool(0.15) {
            break;
        }
    }
    AnnotationTrack::new(total, intervals).unwrap()
}

pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub near_kinks: usize,
    pub worst: String,
}

fn kink_signature(state: &NetworkState<f64>, seq: &EmbeddingSequence<f64>, measure: SimilarityMeasure, with_tsm: bool) -> Vec<u64> {
    let out = forward(state, seq).unwrap();
    let mut sig: Vec<u64> = out.cache.relu_pattern().into_iter().map(u64::from).collect();
    if with_tsm {
        let x = &out.embeddings;
        let (_, cache) = tsm_forward(x, measure).unwrap();
        let (lo, hi) = cache.extrema();
        sig.extend(lo.iter().map(|&v| v as u64));
        sig.extend(hi.iter().map(|&v| v as u64));
        if matches!(measure, SimilarityMeasure::Hamming { .. }) {
            for i in 0..x.rows() {
                for j in 0..x.rows() {
                    for d in 0..x.cols() {
                        let diff = x.get(i, d) - x.get(j, d);
                        sig.push(if diff > 0.0 { 2 } else if diff < 0.0 { 1 } else { 0 });
                    }
                }
            }
        }
    }
    sig
}

/// Central finite differences of the total loss against the analytic
/// gradient, over every scalar parameter. Perturbations that flip a ReLU,
/// a sign inside |.|, or a row extremum of the TSM are counted as kinks
/// and skipped.
pub fn gradient_check(state: &NetworkState<f64>, sample: &Sample<f64>, step: f64) -> GradCheckReport {
    let net = state.config().clone();
    let prepared = prepare_sample(sample, &net, &TrainConfig::default()).unwrap();
    let (_, grads) = sample_objective(state, &prepared).unwrap();
    let with_tsm = net.lambda > 0.0;
    let base_sig = kink_signature(state, &prepared.embeddings, net.similarity, with_tsm);

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        skipped_kinks: 0,
        near_kinks: 0,
        worst: String::new(),
    };
    let mut probe = state.clone();
    for (k, tensor) in state.params().iter().enumerate() {
        for i in 0..tensor.data.len() {
            let orig = tensor.data[i];
            probe.params_mut()[k].data[i] = orig + step;
            let plus_sig = kink_signature(&probe, &prepared.embeddings, net.similarity, with_tsm);
            let plus = evaluate_objective(&probe, &prepared).unwrap().total;
            probe.params_mut()[k].data[i] = orig - step;
            let minus_sig = kink_signature(&probe, &prepared.embeddings, net.similarity, with_tsm);
            let minus = evaluate_objective(&probe, &prepared).unwrap().total;
            probe.params_mut()[k].data[i] = orig;
            if plus_sig != base_sig || minus_sig != base_sig {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * step);
            // Truncation error of the central difference is ~ (4/3)|D(h) - D(h/2)|.
            // Where it alone exceeds the tolerance the loss is not smooth at
            // scale h (a kink just outside the probe), so the entry is skipped.
            probe.params_mut()[k].data[i] = orig + step / 2.0;
            let plus_half = evaluate_objective(&probe, &prepared).unwrap().total;
            probe.params_mut()[k].data[i] = orig - step / 2.0;
            let minus_half = evaluate_objective(&probe, &prepared).unwrap().total;
            probe.params_mut()[k].data[i] = orig;
            let half = (plus_half - minus_half) / step;
            let truncation = (numeric - half).abs() * 4.0 / 3.0;
            let analytic = grads.tensors[k].data[i];
            let scale = analytic.abs() + numeric.abs();
            if scale <= 1e-8 {
                continue;
            }
            let denom = analytic.abs().max(numeric.abs());
            if truncation / denom > 1e-4 {
                report.near_kinks += 1;
                continue;
            }
            let rel = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = format!("{}[{i}]: analytic {analytic:e} numeric {numeric:e}", tensor.name);
            }
        }
    }
    report
}

/// Random small instance: T <= 16, D <= 8, 1-2 stages.
pub fn random_instance(seed: u64) -> (NetworkState<f64>, Sample<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = rng.random_range(4..=16);
    let dim = rng.random_range(1..=8);
    let measure = match rng.random_range(0..3) {
        0 => SimilarityMeasure::Hamming { beta: 4.0 },
        1 => SimilarityMeasure::Euclidean,
        _ => SimilarityMeasure::Correlation,
    };
    let lambda = [1e-5, 0.1, 1.0][rng.random_range(0..3)];
    let cfg = NetworkConfig {
        input_dim: dim,
        aggregator: AggregatorConfig {
            kernel_size: [1, 3, 5][rng.random_range(0..3)],
            out_dim: rng.random_range(2..=5),
        },
        stages: rng.random_range(1..=2),
        layers_per_stage: rng.random_range(1..=3),
        channels: rng.random_range(2..=5),
        dilation_base: 2,
        similarity: measure,
        lambda,
        seed: rng.random(),
        ..NetworkConfig::default()
    };
    let frames_m = Matrix::from_fn(frames, dim, |_, _| rng.random_range(-1.5..1.5));
    let embeddings = EmbeddingSequence::new(frames_m).unwrap();
    let track = random_track(&mut rng, frames);
    (NetworkState::new(cfg).unwrap(), Sample { embeddings, track })
}

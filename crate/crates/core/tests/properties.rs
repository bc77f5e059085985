mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use repcount::counting::{count_repetitions, make_target, ProbabilitySeries, TargetMode};
use repcount::data::{
    annotations_from_json, annotations_to_json, encode_embeddings, generate_sequence, AnnotationTrack,
    EmbeddingSequence, SyntheticSpec,
};
use repcount::losses::{sse_loss, treco_loss};
use repcount::matrix::Matrix;
use repcount::metrics::{mae, oboa};
use repcount::network::{forward, AggregatorConfig, NetworkConfig, NetworkState};
use repcount::similarity::{
    minmax_normalize, predicted_tsm, reference_tsm, SimilarityMatrix, SimilarityMeasure, TsmKind,
};

fn track() -> impl Strategy<Value = AnnotationTrack> {
    (1usize..64, any::<u64>()).prop_map(|(t, seed)| common::random_track(&mut ChaCha8Rng::seed_from_u64(seed), t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reference_is_symmetric_with_unit_diagonal(track in track(), smoothing in prop_oneof![Just(0.0), 0.3..2.5f64]) {
        let s = reference_tsm::<f64>(&track, smoothing).unwrap();
        let n = track.total_frames();
        for i in 0..n {
            prop_assert_eq!(s.get(i, i), 1.0);
            for j in 0..n {
                prop_assert_eq!(s.get(i, j), s.get(j, i));
                prop_assert!((0.0..=1.0).contains(&s.get(i, j)));
            }
        }
    }

    #[test]
    fn unsmoothed_reference_is_binary(track in track()) {
        let s = reference_tsm::<f64>(&track, 0.0).unwrap();
        prop_assert!(s.values().as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn adding_a_repetition_keeps_every_one(track in track(), len in 1usize..6) {
        let total = track.total_frames();
        let after = track.intervals().last().map_or(0, |&(_, e)| e + 1);
        prop_assume!(after + len <= total);
        let mut intervals = track.intervals().to_vec();
        intervals.push((after, after + len - 1));
        let bigger = AnnotationTrack::new(total, intervals).unwrap();
        let a = reference_tsm::<f64>(&track, 0.0).unwrap();
        let b = reference_tsm::<f64>(&bigger, 0.0).unwrap();
        for (x, y) in a.values().as_slice().iter().zip(b.values().as_slice()) {
            prop_assert!(*x != 1.0 || *y == 1.0);
        }
    }

    #[test]
    fn minmax_absorbs_positive_row_affine_maps(
        n in 1usize..12,
        seed in any::<u64>(),
        slopes in prop::collection::vec(0.25..4.0f64, 12),
        offsets in prop::collection::vec(-3.0..3.0f64, 12),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // raw values on a coarse dyadic grid keep the affine maps exact enough
        let raw = Matrix::from_fn(n, n, |_, _| rng.random_range(-8..=8) as f64 / 4.0);
        let scaled = Matrix::from_fn(n, n, |i, j| raw.get(i, j) * slopes[i] + offsets[i]);
        let a = minmax_normalize(&raw).unwrap();
        let b = minmax_normalize(&scaled).unwrap();
        for (x, y) in a.values().as_slice().iter().zip(b.values().as_slice()) {
            prop_assert!((x - y).abs() < 1e-12, "{} vs {}", x, y);
        }
    }

    #[test]
    fn treco_ignores_masked_entries(track in track(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference = reference_tsm::<f64>(&track, 0.0).unwrap();
        let n = track.total_frames();
        let s = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..=1.0));
        let mut t = s.clone();
        for i in 0..n {
            for j in 0..n {
                if reference.get(i, j) == 0.0 {
                    t.set(i, j, rng.random_range(0.0..=1.0));
                }
            }
        }
        let (la, ga) = treco_loss(&SimilarityMatrix::from_values(s, TsmKind::Predicted).unwrap(), &reference).unwrap();
        let (lb, gb) = treco_loss(&SimilarityMatrix::from_values(t, TsmKind::Predicted).unwrap(), &reference).unwrap();
        prop_assert_eq!(la, lb);
        prop_assert_eq!(ga, gb);
    }

    #[test]
    fn losses_are_nonnegative_and_vanish_on_the_support(track in track(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference = reference_tsm::<f64>(&track, 1.0).unwrap();
        let n = track.total_frames();
        let noisy = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..=1.0));
        let (l, _) = treco_loss(&SimilarityMatrix::from_values(noisy, TsmKind::Predicted).unwrap(), &reference).unwrap();
        prop_assert!(l >= 0.0);
        // equal on the support, arbitrary off it
        let exact = Matrix::from_fn(n, n, |i, j| if reference.get(i, j) != 0.0 { reference.get(i, j) } else { 0.7 });
        let (l, g) = treco_loss(&SimilarityMatrix::from_values(exact, TsmKind::Predicted).unwrap(), &reference).unwrap();
        prop_assert_eq!(l, 0.0);
        prop_assert!(g.as_slice().iter().all(|&v| v == 0.0));

        let target: ProbabilitySeries<f64> = make_target(&track, TargetMode::Start, 1.0).unwrap();
        let other = ProbabilitySeries::new((0..n).map(|_| rng.random_range(0.0..=1.0)).collect()).unwrap();
        let (l, _) = sse_loss(&target, &other).unwrap();
        prop_assert!(l >= 0.0);
        let (l, g) = sse_loss(&target, &target).unwrap();
        prop_assert_eq!(l, 0.0);
        prop_assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn separated_starts_are_counted_exactly(
        total in 16usize..300,
        seed in any::<u64>(),
        sigma in prop_oneof![Just(0.0), 0.5..2.0f64],
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = (3.0 * sigma).ceil() as usize;
        // with sigma = 0 two adjacent starts would form one plateau
        let gap = (2 * radius + 1).max(2);
        // starts keep a full bump inside the sequence; an edge frame is never a peak
        let margin = radius.max(1);
        let mut intervals = Vec::new();
        let mut s = margin + rng.random_range(0..4);
        while s + margin < total {
            let end = (s + gap - 1).min(total - 1);
            intervals.push((s, end));
            s += gap + rng.random_range(0..4);
        }
        let track = AnnotationTrack::new(total, intervals).unwrap();
        let target: ProbabilitySeries<f64> = make_target(&track, TargetMode::Start, sigma).unwrap();
        prop_assert_eq!(count_repetitions(target.values(), 0.2).0, track.count());
    }

    #[test]
    fn metrics_ignore_pair_order(pairs in prop::collection::vec((0usize..20, 1usize..20), 1..40), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (o, m) = (oboa(&pairs).unwrap(), mae(&pairs).unwrap());
        prop_assert!((0.0..=1.0).contains(&o));
        prop_assert!(m >= 0.0);
        prop_assert!((o - oboa(&shuffled).unwrap()).abs() < 1e-12);
        prop_assert!((m - mae(&shuffled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_one(counts in prop::collection::vec(0usize..30, 1..40)) {
        let pairs: Vec<_> = counts.iter().map(|&g| (g, g)).collect();
        prop_assert_eq!(oboa(&pairs).unwrap(), 1.0);
    }

    #[test]
    fn generator_is_deterministic_and_valid(seed in any::<u64>()) {
        let spec = SyntheticSpec { t_range: (40, 120), ..SyntheticSpec::default() }.with_seed(seed);
        let (a, ta) = generate_sequence::<f32>(&spec).unwrap();
        let (b, tb) = generate_sequence::<f32>(&spec).unwrap();
        prop_assert_eq!(encode_embeddings(&a), encode_embeddings(&b));
        prop_assert_eq!(annotations_to_json(&ta), annotations_to_json(&tb));
        prop_assert_eq!(annotations_from_json(&annotations_to_json(&ta)).unwrap(), ta);
    }
}

fn tiny_net(stages: usize, seed: u64) -> NetworkConfig {
    NetworkConfig {
        input_dim: 3,
        aggregator: AggregatorConfig { kernel_size: 3, out_dim: 4 },
        stages,
        layers_per_stage: 3,
        channels: 4,
        seed,
        ..NetworkConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn impulse_changes_only_frames_within_the_receptive_field(
        frames in 1usize..80,
        at in any::<prop::sample::Index>(),
        stages in 1usize..3,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let state = NetworkState::<f64>::new(tiny_net(stages, seed)).unwrap();
        let radius = state.config().receptive_radius();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Matrix::from_fn(frames, 3, |_, _| rng.random_range(-1.0..1.0));
        let t = at.index(frames);
        let mut bumped = base.clone();
        bumped.set(t, 0, bumped.get(t, 0) + 5.0);
        let a = forward(&state, &EmbeddingSequence::new(base).unwrap()).unwrap().probs;
        let b = forward(&state, &EmbeddingSequence::new(bumped).unwrap()).unwrap().probs;
        for k in 0..frames {
            let v = a.values()[k];
            prop_assert!(v > 0.0 && v < 1.0);
            if k.abs_diff(t) > radius {
                prop_assert_eq!(v, b.values()[k], "frame {} changed, impulse at {}, radius {}", k, t, radius);
            }
        }
    }

    #[test]
    fn first_stage_of_two_equals_single_stage_model(frames in 1usize..60, seed in any::<u64>()) {
        use rand::Rng;
        let two = NetworkState::<f64>::new(tiny_net(2, seed)).unwrap();
        let mut one = NetworkState::<f64>::new(tiny_net(1, seed ^ 1)).unwrap();
        let names: Vec<String> = one.params().iter().map(|t| t.name.clone()).collect();
        for name in names {
            let src = two.param(&name).unwrap().data.clone();
            one.param_mut(&name).unwrap().data.copy_from_slice(&src);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = EmbeddingSequence::new(Matrix::from_fn(frames, 3, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let out_two = forward(&two, &seq).unwrap();
        let out_one = forward(&one, &seq).unwrap();
        prop_assert_eq!(out_two.cache.num_stages(), 2);
        prop_assert_eq!(out_two.cache.stage_probs(0).unwrap(), out_one.probs.values());
        prop_assert_eq!(out_two.cache.stage_probs(1).unwrap(), out_two.probs.values());
    }
}

#[test]
fn noise_free_equal_repetitions_align_to_one() {
    for measure in [SimilarityMeasure::default(), SimilarityMeasure::Euclidean] {
        for seed in 0..10 {
            let spec = SyntheticSpec {
                duration_range: (12, 12),
                noise_sigma: 0.0,
                ..SyntheticSpec::default()
            }
            .with_seed(seed);
            let (seq, track) = generate_sequence::<f64>(&spec).unwrap();
            let tsm = predicted_tsm(&seq, measure).unwrap();
            let iv = track.intervals();
            for a in iv {
                for b in iv {
                    for k in 0..12 {
                        assert_eq!(tsm.get(a.0 + k, b.0 + k), 1.0, "seed {seed}, {a:?} vs {b:?}, offset {k}");
                    }
                }
            }
        }
    }
}

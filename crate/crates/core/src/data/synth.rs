use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AnnotationTrack, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Sinusoid components summed per motif dimension.
const MOTIF_COMPONENTS: usize = 3;
/// Grid used to normalize each motif dimension to unit peak amplitude.
const MOTIF_NORM_GRID: usize = 256;
/// Probability that leftover frames are partly spent on one long break.
const LONG_BREAK_PROB: f64 = 0.3;

/// Parameters of the synthetic annotated-sequence generator. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub rng_seed: u64,
    pub t_range: (usize, usize),
    pub dim: usize,
    pub reps_range: (usize, usize),
    pub duration_range: (usize, usize),
    pub gap_range: (usize, usize),
    pub noise_sigma: f64,
    pub motif_dim: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            t_range: (64, 256),
            dim: 16,
            reps_range: (2, 12),
            duration_range: (8, 24),
            gap_range: (0, 8),
            noise_sigma: 0.05,
            motif_dim: 8,
        }
    }
}

impl SyntheticSpec {
    pub fn with_seed(&self, rng_seed: u64) -> Self {
        Self {
            rng_seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range = |name: &str, (lo, hi): (usize, usize)| {
            if lo > hi {
                Err(Error::InvalidValue(format!("{name}: min {lo} > max {hi}")))
            } else {
                Ok(())
            }
        };
        range("t_range", self.t_range)?;
        range("reps_range", self.reps_range)?;
        range("duration_range", self.duration_range)?;
        range("gap_range", self.gap_range)?;
        if self.t_range.0 == 0 {
            return Err(Error::InvalidValue("t_range: min must be >= 1".into()));
        }
        if self.duration_range.0 == 0 {
            return Err(Error::InvalidValue("duration_range: min must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidValue("dim must be >= 1".into()));
        }
        if self.motif_dim == 0 || self.motif_dim > self.dim {
            return Err(Error::InvalidValue(format!(
                "motif_dim must be in 1..={}, got {}",
                self.dim, self.motif_dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        let max_reps = self.reps_range.1;
        let needed = max_reps * self.duration_range.0 + max_reps.saturating_sub(1) * self.gap_range.0;
        if needed > self.t_range.1 {
            return Err(Error::Infeasible(format!(
                "{max_reps} repetitions of at least {} frames with gaps of at least {} need {needed} frames, max T is {}",
                self.duration_range.0, self.gap_range.0, self.t_range.1
            )));
        }
        Ok(())
    }
}

/// Seed of the `index`-th sequence of a dataset rooted at `base` (splitmix64 mix).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Motif {
    // per motif dimension: (amplitude, frequency, phase) triples
    components: Vec<[(f64, f64, f64); MOTIF_COMPONENTS]>,
    scale: Vec<f64>,
}

impl Motif {
    fn sample(rng: &mut ChaCha8Rng, dims: usize) -> Self {
        let components: Vec<_> = (0..dims)
            .map(|_| {
                std::array::from_fn(|_| {
                    let amp = rng.random_range(0.3..1.0);
                    let freq = rng.random_range(0.5..2.5);
                    let phase = rng.random_range(0.0..TAU);
                    (amp, freq, phase)
                })
            })
            .collect();
        let mut motif = Self {
            scale: vec![1.0; dims],
            components,
        };
        for d in 0..dims {
            let peak = (0..=MOTIF_NORM_GRID)
                .map(|k| motif.raw(d, k as f64 / MOTIF_NORM_GRID as f64).abs())
                .fold(0.0, f64::max);
            motif.scale[d] = if peak > 0.0 { 1.0 / peak } else { 1.0 };
        }
        motif
    }

    fn raw(&self, d: usize, u: f64) -> f64 {
        self.components[d]
            .iter()
            .map(|&(a, f, p)| a * (TAU * f * u + p).sin())
            .sum()
    }

    /// Motif value in dimension `d` at phase `u` in `[0, 1]`.
    fn at(&self, d: usize, u: f64) -> f64 {
        self.raw(d, u) * self.scale[d]
    }
}

/// Deterministically generates one annotated sequence from `spec.rng_seed`.
///
/// Layout: idle lead-in, then repetitions separated by idle gaps (one of
/// which may be stretched into a long break), then an idle tail. Each
/// repetition is the per-sequence motif linearly time-warped to its
/// duration. Idle frames carry a constant per-sequence signature.
pub fn generate_sequence<T: Scalar>(
    spec: &SyntheticSpec,
) -> Result<(EmbeddingSequence<T>, AnnotationTrack)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let reps = rng.random_range(spec.reps_range.0..=spec.reps_range.1);
    let (dmin, dmax) = spec.duration_range;
    let (gmin, gmax) = spec.gap_range;
    let mut durations: Vec<usize> = (0..reps).map(|_| rng.random_range(dmin..=dmax)).collect();
    let mut gaps: Vec<usize> = (0..reps.saturating_sub(1))
        .map(|_| rng.random_range(gmin..=gmax))
        .collect();

    // shrink the largest adjustable element until the content fits
    let mut content: usize = durations.iter().sum::<usize>() + gaps.iter().sum::<usize>();
    while content > spec.t_range.1 {
        let best_gap = gaps
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > gmin)
            .max_by_key(|(i, &g)| (g, std::cmp::Reverse(*i)));
        let best_dur = durations
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > dmin)
            .max_by_key(|(i, &d)| (d, std::cmp::Reverse(*i)));
        match (best_gap, best_dur) {
            (Some((gi, &g)), Some((_, &d))) if g >= d => gaps[gi] -= 1,
            (_, Some((di, _))) => durations[di] -= 1,
            (Some((gi, _)), None) => gaps[gi] -= 1,
            (None, None) => unreachable!("validated spec always fits at minimum sizes"),
        }
        content -= 1;
    }

    let total = rng.random_range(spec.t_range.0.max(content)..=spec.t_range.1);
    let mut leftover = total - content;
    if reps >= 2 && leftover > 0 && rng.random_bool(LONG_BREAK_PROB) {
        let at = rng.random_range(0..gaps.len());
        let extra = rng.random_range(leftover.div_ceil(2)..=leftover);
        gaps[at] += extra;
        leftover -= extra;
    }
    let lead_in = rng.random_range(0..=leftover);

    let motif = Motif::sample(&mut rng, spec.motif_dim);
    let idle: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-1.0..1.0)).collect();

    let mut values = vec![0.0f64; total * spec.dim];
    for t in 0..total {
        values[t * spec.dim..(t + 1) * spec.dim].copy_from_slice(&idle);
    }
    let mut intervals = Vec::with_capacity(reps);
    let mut cursor = lead_in;
    for (r, &dur) in durations.iter().enumerate() {
        let (start, end) = (cursor, cursor + dur - 1);
        for k in 0..dur {
            let u = if dur > 1 { k as f64 / (dur - 1) as f64 } else { 0.0 };
            let row = &mut values[(start + k) * spec.dim..(start + k + 1) * spec.dim];
            row.fill(0.0);
            for (d, v) in row.iter_mut().take(spec.motif_dim).enumerate() {
                *v = motif.at(d, u);
            }
        }
        intervals.push((start, end));
        cursor = end + 1 + gaps.get(r).copied().unwrap_or(0);
    }

    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidValue(format!("noise_sigma: {e}")))?;
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let frames = Matrix::from_vec(total, spec.dim, values.into_iter().map(T::lit).collect())
        .expect("shape computed above");
    Ok((
        EmbeddingSequence::new(frames)?,
        AnnotationTrack::new(total, intervals)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_spec() -> SyntheticSpec {
        SyntheticSpec {
            rng_seed: 7,
            t_range: (30, 30),
            dim: 4,
            reps_range: (3, 3),
            duration_range: (10, 10),
            gap_range: (0, 0),
            noise_sigma: 0.05,
            motif_dim: 2,
        }
    }

    #[test]
    fn zero_gaps_fixed_durations_tile_the_sequence() {
        let (seq, track) = generate_sequence::<f64>(&fixed_spec()).unwrap();
        assert_eq!(seq.len(), 30);
        assert_eq!(track.intervals(), &[(0, 9), (10, 19), (20, 29)]);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_sequence::<f32>(&fixed_spec()).unwrap();
        let b = generate_sequence::<f32>(&fixed_spec()).unwrap();
        assert_eq!(a, b);
        let bits = |s: &EmbeddingSequence<f32>| {
            s.frames().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(&a.0), bits(&b.0));
    }

    #[test]
    fn count_histogram_covers_full_range() {
        let base = SyntheticSpec::default();
        let mut seen = [0usize; 13];
        for i in 0..100 {
            let (_, track) = generate_sequence::<f32>(&base.with_seed(derive_seed(11, i))).unwrap();
            seen[track.count()] += 1;
        }
        for (n, &c) in seen.iter().enumerate().skip(2) {
            assert!(c > 0, "count {n} never generated: {seen:?}");
        }
        assert_eq!(seen[0] + seen[1], 0);
    }

    #[test]
    fn infeasible_spec_is_an_error() {
        let spec = SyntheticSpec {
            t_range: (10, 20),
            reps_range: (3, 3),
            duration_range: (8, 8),
            ..fixed_spec()
        };
        assert!(matches!(generate_sequence::<f32>(&spec), Err(Error::Infeasible(_))));
    }

    #[test]
    fn noise_free_equal_duration_reps_match_in_motif_dims() {
        let spec = SyntheticSpec {
            noise_sigma: 0.0,
            gap_range: (0, 5),
            t_range: (40, 60),
            ..fixed_spec()
        };
        let (seq, track) = generate_sequence::<f64>(&spec).unwrap();
        let iv = track.intervals();
        for k in 0..10 {
            for d in 0..spec.motif_dim {
                assert_eq!(seq.frame(iv[0].0 + k)[d], seq.frame(iv[2].0 + k)[d]);
            }
        }
    }

    #[test]
    fn shrinking_keeps_content_within_max_t() {
        let spec = SyntheticSpec {
            t_range: (20, 40),
            reps_range: (4, 4),
            duration_range: (5, 20),
            gap_range: (0, 10),
            ..fixed_spec()
        };
        for s in 0..50 {
            let (seq, track) = generate_sequence::<f32>(&spec.with_seed(s)).unwrap();
            assert!(seq.len() <= 40);
            assert_eq!(track.count(), 4);
            for &(a, b) in track.intervals() {
                assert!(b - a + 1 >= 5);
            }
        }
    }
}

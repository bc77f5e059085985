mod common;

use common::{brute_force_peaks, random_series};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repcount::counting::{count_repetitions, find_peaks};

#[test]
fn matches_brute_force_on_1000_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let len = rng.random_range(1..=512);
        let x = random_series(&mut rng, len);
        let got: Vec<_> = find_peaks(&x)
            .into_iter()
            .map(|p| (p.index, p.prominence, p.left_base, p.right_base))
            .collect();
        assert_eq!(got, brute_force_peaks(&x), "case {case}, len {len}");
    }
}

fn sorted_prominences(x: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = find_peaks(x).into_iter().map(|p| p.prominence).collect();
    p.sort_by(f64::total_cmp);
    p
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    // dyadic values, coarse (many ties and plateaus) or fine
    let value = prop_oneof![(0u32..8).prop_map(|v| v as f64 / 8.0), (0u32..896).prop_map(|v| v as f64 / 1024.0)];
    prop::collection::vec(value, 1..200)
}

proptest! {
    #[test]
    fn count_is_non_increasing_in_threshold(x in series(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(count_repetitions(&x, hi).0 <= count_repetitions(&x, lo).0);
    }

    #[test]
    fn shifting_by_a_constant_keeps_prominences(x in series(), k in 0u8..=16) {
        let c = k as f64 / 128.0;
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert_eq!(sorted_prominences(&shifted), sorted_prominences(&x));
        prop_assert_eq!(count_repetitions(&shifted, 0.2).0, count_repetitions(&x, 0.2).0);
    }

    #[test]
    fn reversal_keeps_prominence_multiset(x in series()) {
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        prop_assert_eq!(sorted_prominences(&rev), sorted_prominences(&x));
    }
}

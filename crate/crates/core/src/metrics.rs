//! Counting metrics over (predicted, ground-truth) pairs and dataset evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{count_repetitions, make_target, TargetMode};
use crate::data::{AnnotationTrack, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::network::{forward, NetworkState, Sample};
use crate::scalar::Scalar;

/// Fraction of pairs with `|predicted - truth| <= 1`.
pub fn oboa(pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidValue("OBOA of an empty list".into()));
    }
    let hits = pairs.iter().filter(|(p, g)| p.abs_diff(*g) <= 1).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Mean of `|predicted - truth| / truth`. Pairs with zero truth are skipped;
/// it is an error if nothing remains.
pub fn mae(pairs: &[(usize, usize)]) -> Result<f64> {
    let errs: Vec<f64> = pairs.iter().filter_map(|&(p, g)| normalized_error(p, g)).collect();
    if errs.is_empty() {
        return Err(Error::InvalidValue(
            "MAE needs at least one pair with a non-zero ground truth".into(),
        ));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

fn normalized_error(predicted: usize, truth: usize) -> Option<f64> {
    (truth > 0).then(|| predicted.abs_diff(truth) as f64 / truth as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub predicted: usize,
    pub ground_truth: usize,
    /// `None` when the ground truth is zero.
    pub abs_err_normalized: Option<f64>,
    pub within_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// `NaN` (serialized as `null`) if every ground truth is zero.
    pub mae: f64,
    pub oboa: f64,
    pub n: usize,
    pub excluded_zero_gt: usize,
    pub per_item: Vec<ItemResult>,
}

impl EvalResult {
    pub fn from_pairs(pairs: &[(usize, usize)]) -> Result<Self> {
        let per_item: Vec<ItemResult> = pairs
            .iter()
            .map(|&(p, g)| ItemResult {
                predicted: p,
                ground_truth: g,
                abs_err_normalized: normalized_error(p, g),
                within_one: p.abs_diff(g) <= 1,
            })
            .collect();
        Ok(Self {
            mae: mae(pairs).unwrap_or(f64::NAN),
            oboa: oboa(pairs)?,
            n: pairs.len(),
            excluded_zero_gt: pairs.iter().filter(|(_, g)| *g == 0).count(),
            per_item,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

/// Produces per-frame start probabilities for a sequence already at
/// evaluation resolution. `track` is the matching (strided) annotation, which
/// real models ignore.
pub trait Predictor<T: Scalar>: Sync {
    fn predict(&self, embeddings: &EmbeddingSequence<T>, track: &AnnotationTrack) -> Result<Vec<T>>;
}

impl<T: Scalar> Predictor<T> for NetworkState<T> {
    fn predict(&self, embeddings: &EmbeddingSequence<T>, _track: &AnnotationTrack) -> Result<Vec<T>> {
        Ok(forward(self, embeddings)?.probs.values().to_vec())
    }
}

/// Emits the training target itself; counts it yields measure the counting
/// rule, not a model.
#[derive(Debug, Clone, Copy)]
pub struct OraclePredictor {
    pub mode: TargetMode,
    pub sigma: f64,
}

impl<T: Scalar> Predictor<T> for OraclePredictor {
    fn predict(&self, _embeddings: &EmbeddingSequence<T>, track: &AnnotationTrack) -> Result<Vec<T>> {
        Ok(make_target::<T>(track, self.mode, self.sigma)?.values().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub stride: usize,
    pub thresholds: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            stride: 1,
            thresholds: vec![crate::counting::DEFAULT_PROMINENCE_THRESHOLD],
        }
    }
}

/// One prediction pass over `dataset`, scored at every threshold in
/// `cfg.thresholds` (results in the same order). Ground truth is the
/// full-resolution annotation count regardless of stride.
pub fn evaluate<T: Scalar, P: Predictor<T>>(
    predictor: &P,
    dataset: &[Sample<T>],
    cfg: &EvalConfig,
) -> Result<Vec<EvalResult>> {
    if dataset.is_empty() {
        return Err(Error::InvalidValue("evaluation dataset is empty".into()));
    }
    if cfg.stride == 0 {
        return Err(Error::InvalidValue("stride must be >= 1".into()));
    }
    if let Some(t) = cfg.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidValue(format!("threshold {t} outside [0, 1]")));
    }
    let series: Vec<Vec<T>> = dataset
        .par_iter()
        .map(|s| predictor.predict(&s.embeddings.subsample(cfg.stride), &s.track.subsample(cfg.stride)))
        .collect::<Result<_>>()?;
    cfg.thresholds
        .iter()
        .map(|&th| {
            let pairs: Vec<(usize, usize)> = series
                .iter()
                .zip(dataset)
                .map(|(p, s)| (count_repetitions(p, T::lit(th)).0, s.track.count()))
                .collect();
            EvalResult::from_pairs(&pairs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oboa_examples() {
        assert_eq!(oboa(&[(4, 4)]).unwrap(), 1.0);
        assert_eq!(oboa(&[(5, 4), (7, 4)]).unwrap(), 0.5);
        assert_eq!(oboa(&[(0, 1)]).unwrap(), 1.0);
        assert!(oboa(&[]).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[(4, 4)]).unwrap(), 0.0);
        assert_eq!(mae(&[(5, 4)]).unwrap(), 0.25);
        assert_eq!(mae(&[(2, 4), (6, 4)]).unwrap(), 0.5);
        assert!(mae(&[(3, 0)]).is_err());
    }

    #[test]
    fn zero_truth_is_excluded_and_reported() {
        let r = EvalResult::from_pairs(&[(5, 4), (1, 0)]).unwrap();
        assert_eq!(r.mae, 0.25);
        assert_eq!(r.oboa, 1.0);
        assert_eq!(r.excluded_zero_gt, 1);
        assert_eq!(r.per_item[1].abs_err_normalized, None);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["excluded_zero_gt", "mae", "n", "oboa", "per_item"]);
    }
}

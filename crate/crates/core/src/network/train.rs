use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, forward, Gradients, NetworkConfig, NetworkState};
use crate::counting::{make_target, ProbabilitySeries, DEFAULT_PROMINENCE_THRESHOLD, DEFAULT_TARGET_SIGMA};
use crate::data::{derive_seed, AnnotationTrack, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::losses::{sse_loss, total_loss, treco_loss, LossReport};
use crate::scalar::Scalar;
use crate::similarity::{reference_tsm, tsm_backward, tsm_forward, SimilarityMatrix, DEFAULT_REFERENCE_SMOOTHING};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Keep every `stride`-th frame (1 = full temporal resolution).
    pub stride: usize,
    /// Width of the Gaussian start targets, in frames.
    pub gaussian_sigma: f64,
    /// Blur of the reference TSM, in frames.
    pub reference_smoothing: f64,
    pub prominence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 6.4e-5,
            batch_size: 16,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            stride: 1,
            gaussian_sigma: DEFAULT_TARGET_SIGMA,
            reference_smoothing: DEFAULT_REFERENCE_SMOOTHING,
            prominence_threshold: DEFAULT_PROMINENCE_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidValue(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1), got {v}"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        for (name, v) in [
            ("gaussian_sigma", self.gaussian_sigma),
            ("reference_smoothing", self.reference_smoothing),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.prominence_threshold) {
            return bad(format!(
                "prominence_threshold must be in [0, 1], got {}",
                self.prominence_threshold
            ));
        }
        Ok(())
    }
}

/// One annotated training or evaluation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub embeddings: EmbeddingSequence<T>,
    pub track: AnnotationTrack,
}

/// A sample at training resolution with its targets built.
#[derive(Debug, Clone)]
pub struct PreparedSample<T> {
    pub embeddings: EmbeddingSequence<T>,
    pub track: AnnotationTrack,
    pub target: ProbabilitySeries<T>,
    /// Only built when lambda > 0.
    pub reference: Option<SimilarityMatrix<T>>,
}

pub fn prepare_sample<T: Scalar>(
    sample: &Sample<T>,
    net: &NetworkConfig,
    train: &TrainConfig,
) -> Result<PreparedSample<T>> {
    if sample.track.total_frames() != sample.embeddings.len() {
        return Err(Error::Dimension(format!(
            "annotation covers {} frames, embeddings have {}",
            sample.track.total_frames(),
            sample.embeddings.len()
        )));
    }
    let embeddings = sample.embeddings.subsample(train.stride);
    let track = sample.track.subsample(train.stride);
    let target = make_target(&track, net.target_mode, train.gaussian_sigma)?;
    let reference = if net.lambda > 0.0 {
        Some(reference_tsm(&track, train.reference_smoothing)?)
    } else {
        None
    };
    Ok(PreparedSample {
        embeddings,
        track,
        target,
        reference,
    })
}

fn objective<T: Scalar>(
    state: &NetworkState<T>,
    sample: &PreparedSample<T>,
    with_gradients: bool,
) -> Result<(LossReport, Option<Gradients<T>>)> {
    let cfg = state.config();
    let out = forward(state, &sample.embeddings)?;
    let (sse, d_probs) = sse_loss(&sample.target, &out.probs)?;
    let lambda = T::lit(cfg.lambda);
    let mut treco = T::zero();
    let mut d_emb = None;
    if cfg.lambda > 0.0 {
        let reference = sample
            .reference
            .as_ref()
            .ok_or_else(|| Error::InvalidValue("lambda > 0 but no reference TSM was prepared".into()))?;
        let (tsm, tsm_cache) = tsm_forward(&out.embeddings, cfg.similarity)?;
        let (loss, d_tsm) = treco_loss(&tsm, reference)?;
        treco = loss;
        if with_gradients {
            let mut d = tsm_backward(&out.embeddings, &tsm_cache, cfg.similarity, &d_tsm)?;
            for v in d.as_mut_slice() {
                *v *= lambda;
            }
            d_emb = Some(d);
        }
    }
    let (sse, treco) = (sse.to_f64_lossy(), treco.to_f64_lossy());
    let report = if sse.is_finite() && treco.is_finite() {
        total_loss(sse, treco, cfg.lambda)?
    } else {
        LossReport {
            sse,
            treco,
            total: f64::NAN,
            lambda: cfg.lambda,
        }
    };
    let grads = if with_gradients {
        Some(backward(state, &out.cache, &d_probs, d_emb.as_ref())?)
    } else {
        None
    };
    Ok((report, grads))
}

/// Loss of one prepared sample and the gradient of `sse + lambda * treco`.
pub fn sample_objective<T: Scalar>(
    state: &NetworkState<T>,
    sample: &PreparedSample<T>,
) -> Result<(LossReport, Gradients<T>)> {
    let (report, grads) = objective(state, sample, true)?;
    Ok((report, grads.expect("requested")))
}

/// Loss only, no backward pass.
pub fn evaluate_objective<T: Scalar>(state: &NetworkState<T>, sample: &PreparedSample<T>) -> Result<LossReport> {
    Ok(objective(state, sample, false)?.0)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub state: NetworkState<T>,
    /// Mean per-sequence loss of each epoch.
    pub history: Vec<LossReport>,
}

/// Trains a freshly initialized network.
pub fn train<T: Scalar>(
    dataset: &[Sample<T>],
    net: &NetworkConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    train_from(NetworkState::new(net.clone())?, dataset, cfg)
}

/// Continues training `state`. Each epoch shuffles the dataset with a seed
/// derived from the network seed and the Adam step counter, splits it into
/// mini-batches, and averages per-sequence gradients within each batch in a
/// fixed order.
pub fn train_from<T: Scalar>(
    mut state: NetworkState<T>,
    dataset: &[Sample<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidValue("training dataset is empty".into()));
    }
    let prepared: Vec<PreparedSample<T>> = dataset
        .par_iter()
        .map(|s| prepare_sample(s, state.config(), cfg))
        .collect::<Result<_>>()?;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(state.config().seed, state.adam.step));
        order.shuffle(&mut rng);
        let mut reports = Vec::with_capacity(prepared.len());
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(usize, Result<(LossReport, Gradients<T>)>)> = batch
                .par_iter()
                .map(|&i| (i, sample_objective(&state, &prepared[i])))
                .collect();
            let mut total = Gradients::zeros_like(&state);
            for (i, r) in results {
                let (report, grads) = r?;
                if !report.total.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, sequence: i });
                }
                total.add_assign(&grads);
                reports.push(report);
            }
            total.scale(T::one() / T::from_usize_lossy(batch.len()));
            adam_step(&mut state, &total, cfg)?;
        }
        history.push(LossReport::mean(&reports));
    }
    Ok(TrainOutcome { state, history })
}

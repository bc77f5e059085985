use super::conv::{self, ConvShape};
use super::{ConvParams, Gradients, NetworkState};
use crate::counting::ProbabilitySeries;
use crate::data::EmbeddingSequence;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone)]
struct StageCache<T> {
    input: Matrix<T>,
    /// residual stream before each layer, plus the final one
    hidden: Vec<Matrix<T>>,
    /// ReLU outputs of each layer's dilated conv
    activations: Vec<Matrix<T>>,
    probs: Vec<T>,
}

/// Intermediates of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    generation: u64,
    input: Matrix<T>,
    embeddings: Matrix<T>,
    stages: Vec<StageCache<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Sigmoid output of stage `s` (0-based).
    pub fn stage_probs(&self, s: usize) -> Option<&[T]> {
        self.stages.get(s).map(|c| c.probs.as_slice())
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// On/off state of every ReLU unit, in a fixed order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.stages
            .iter()
            .flat_map(|s| s.activations.iter())
            .flat_map(|a| a.as_slice().iter().map(|v| *v > T::zero()))
            .collect()
    }
}

pub struct ForwardOutput<T> {
    /// Per-frame embeddings from the aggregation layer (`T x out_dim`).
    pub embeddings: Matrix<T>,
    /// Sigmoid output of the last stage.
    pub probs: ProbabilitySeries<T>,
    pub cache: ForwardCache<T>,
}

fn tensors<'a, T>(state: &'a NetworkState<T>, p: &ConvParams) -> (&'a [T], &'a [T]) {
    (&state.params[p.weight].data, &state.params[p.bias].data)
}

fn run<T: Scalar>(state: &NetworkState<T>, p: &ConvParams, input: &Matrix<T>) -> Matrix<T> {
    let (w, b) = tensors(state, p);
    conv::forward(p.shape, w, b, input)
}

pub fn forward<T: Scalar>(state: &NetworkState<T>, seq: &EmbeddingSequence<T>) -> Result<ForwardOutput<T>> {
    let cfg = state.config();
    if seq.dim() != cfg.input_dim {
        return Err(Error::Dimension(format!(
            "network expects {}-dimensional frames, got {}",
            cfg.input_dim,
            seq.dim()
        )));
    }
    let layout = state.layout();
    let input = seq.frames().clone();
    let embeddings = run(state, &layout.aggregator, &input).map(|v| v.tanh());

    let mut stages = Vec::with_capacity(layout.stages.len());
    let mut stage_input = embeddings.clone();
    for stage in &layout.stages {
        let mut h = run(state, &stage.input, &stage_input);
        let mut hidden = Vec::with_capacity(stage.layers.len() + 1);
        let mut activations = Vec::with_capacity(stage.layers.len());
        for (dilated, pointwise) in &stage.layers {
            let a = run(state, dilated, &h).map(|v| v.max(T::zero()));
            let u = run(state, pointwise, &a);
            let mut next = h.clone();
            for (x, y) in next.as_mut_slice().iter_mut().zip(u.as_slice()) {
                *x += *y;
            }
            hidden.push(h);
            activations.push(a);
            h = next;
        }
        let logits = run(state, &stage.head, &h);
        hidden.push(h);
        let probs: Vec<T> = logits.as_slice().iter().map(|&z| sigmoid(z)).collect();
        let next_input = Matrix::from_vec(probs.len(), 1, probs.clone()).expect("column vector");
        stages.push(StageCache {
            input: std::mem::replace(&mut stage_input, next_input),
            hidden,
            activations,
            probs,
        });
    }

    let probs = ProbabilitySeries::new(stages.last().expect("stages >= 1").probs.clone())?;
    Ok(ForwardOutput {
        embeddings: embeddings.clone(),
        probs,
        cache: ForwardCache {
            generation: state.generation(),
            input,
            embeddings,
            stages,
        },
    })
}

fn back<T: Scalar>(
    state: &NetworkState<T>,
    grads: &mut Gradients<T>,
    p: &ConvParams,
    input: &Matrix<T>,
    d_out: &Matrix<T>,
    want_input: bool,
) -> Option<Matrix<T>> {
    let shape: ConvShape = p.shape;
    let w = &state.params[p.weight].data;
    let mut d_input = want_input.then(|| Matrix::zeros(input.rows(), shape.in_dim));
    // weight and bias are distinct tensors
    let (lo, hi) = grads.tensors.split_at_mut(p.bias);
    conv::backward(
        shape,
        w,
        input,
        d_out,
        &mut lo[p.weight].data,
        &mut hi[0].data,
        d_input.as_mut(),
    );
    d_input
}

/// Reverse-mode gradients of a scalar loss given its gradient w.r.t. the
/// final probabilities and (optionally) w.r.t. the aggregated embeddings.
pub fn backward<T: Scalar>(
    state: &NetworkState<T>,
    cache: &ForwardCache<T>,
    d_probs: &[T],
    d_embeddings: Option<&Matrix<T>>,
) -> Result<Gradients<T>> {
    if cache.generation != state.generation() {
        return Err(Error::StaleCache(format!(
            "cache from parameter generation {}, state is at {}",
            cache.generation,
            state.generation()
        )));
    }
    let layout = state.layout();
    let frames = cache.input.rows();
    if cache.stages.len() != layout.stages.len() || cache.input.cols() != state.config().input_dim {
        return Err(Error::StaleCache("cache does not match network configuration".into()));
    }
    if d_probs.len() != frames {
        return Err(Error::Dimension(format!(
            "probability gradient has length {}, expected {frames}",
            d_probs.len()
        )));
    }
    if let Some(d) = d_embeddings {
        if d.shape() != cache.embeddings.shape() {
            return Err(Error::Dimension(format!(
                "embedding gradient is {:?}, expected {:?}",
                d.shape(),
                cache.embeddings.shape()
            )));
        }
    }

    let mut grads = Gradients::zeros_like(state);
    let mut d_p: Vec<T> = d_probs.to_vec();
    let mut d_emb = Matrix::zeros(frames, cache.embeddings.cols());
    for (s, stage) in layout.stages.iter().enumerate().rev() {
        let c = &cache.stages[s];
        let d_logits: Vec<T> = d_p
            .iter()
            .zip(&c.probs)
            .map(|(&g, &p)| g * p * (T::one() - p))
            .collect();
        let d_logits = Matrix::from_vec(frames, 1, d_logits).expect("column vector");
        let last_hidden = c.hidden.last().expect("final hidden");
        let mut d_h = back(state, &mut grads, &stage.head, last_hidden, &d_logits, true).expect("input grad");
        for (l, (dilated, pointwise)) in stage.layers.iter().enumerate().rev() {
            let a = &c.activations[l];
            let mut d_a = back(state, &mut grads, pointwise, a, &d_h, true).expect("input grad");
            for (g, &av) in d_a.as_mut_slice().iter_mut().zip(a.as_slice()) {
                if av <= T::zero() {
                    *g = T::zero();
                }
            }
            let d_branch = back(state, &mut grads, dilated, &c.hidden[l], &d_a, true).expect("input grad");
            for (g, b) in d_h.as_mut_slice().iter_mut().zip(d_branch.as_slice()) {
                *g += *b;
            }
        }
        let d_in = back(state, &mut grads, &stage.input, &c.input, &d_h, true).expect("input grad");
        if s == 0 {
            d_emb = d_in;
        } else {
            d_p = d_in.into_vec();
        }
    }

    if let Some(d) = d_embeddings {
        for (g, e) in d_emb.as_mut_slice().iter_mut().zip(d.as_slice()) {
            *g += *e;
        }
    }
    for (g, &x) in d_emb.as_mut_slice().iter_mut().zip(cache.embeddings.as_slice()) {
        *g *= T::one() - x * x;
    }
    back(state, &mut grads, &layout.aggregator, &cache.input, &d_emb, false);
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{AggregatorConfig, NetworkConfig};

    fn cfg(stages: usize) -> NetworkConfig {
        NetworkConfig {
            input_dim: 3,
            aggregator: AggregatorConfig {
                kernel_size: 3,
                out_dim: 4,
            },
            stages,
            layers_per_stage: 2,
            channels: 5,
            seed: 3,
            ..NetworkConfig::default()
        }
    }

    fn seq(frames: usize) -> EmbeddingSequence<f64> {
        EmbeddingSequence::new(Matrix::from_fn(frames, 3, |t, d| ((t * 7 + d * 3) % 11) as f64 / 5.0 - 1.0))
            .unwrap()
    }

    #[test]
    fn zero_head_gives_half() {
        let mut state = NetworkState::<f64>::new(cfg(2)).unwrap();
        state.param_mut("stage1.head.weight").unwrap().data.fill(0.0);
        state.param_mut("stage1.head.bias").unwrap().data.fill(0.0);
        let out = forward(&state, &seq(9)).unwrap();
        assert!(out.probs.values().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn single_frame_and_dimension_errors() {
        let state = NetworkState::<f64>::new(cfg(2)).unwrap();
        let out = forward(&state, &seq(1)).unwrap();
        assert_eq!(out.probs.len(), 1);
        assert_eq!(out.embeddings.shape(), (1, 4));
        let bad = EmbeddingSequence::new(Matrix::<f64>::zeros(4, 2)).unwrap();
        assert!(forward(&state, &bad).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let state = NetworkState::<f64>::new(cfg(2)).unwrap();
        let out = forward(&state, &seq(8)).unwrap();
        let g = backward(&state, &out.cache, &[0.0; 8], Some(&Matrix::zeros(8, 4))).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut state = NetworkState::<f64>::new(cfg(1)).unwrap();
        let out = forward(&state, &seq(5)).unwrap();
        state.param_mut("stage0.head.bias").unwrap().data[0] = 1.0;
        assert!(matches!(
            backward(&state, &out.cache, &[1.0; 5], None),
            Err(Error::StaleCache(_))
        ));
    }

    #[test]
    fn forward_is_bit_stable() {
        let state = NetworkState::<f32>::new(cfg(2)).unwrap();
        let s = seq(17).cast::<f32>();
        let a = forward(&state, &s).unwrap().probs;
        let b = forward(&state, &s).unwrap().probs;
        let bits = |p: &ProbabilitySeries<f32>| p.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}

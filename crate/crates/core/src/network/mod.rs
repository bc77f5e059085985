//! Learnable model: a temporal aggregation layer producing per-frame
//! embeddings, followed by a multi-stage dilated TCN whose every stage ends
//! in a sigmoid. Forward, exact backward, Adam, training, checkpoints.

mod adam;
mod checkpoint;
mod conv;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{backward, forward, ForwardCache, ForwardOutput};
pub use train::{
    evaluate_objective, prepare_sample, sample_objective, train, train_from, PreparedSample,
    Sample, TrainConfig, TrainOutcome,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counting::TargetMode;
use crate::error::{Error, Result};
use crate::losses::DEFAULT_LAMBDA;
use crate::scalar::Scalar;
use crate::similarity::SimilarityMeasure;
use conv::ConvShape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregatorConfig {
    pub kernel_size: usize,
    pub out_dim: usize,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        Self {
            kernel_size: 3,
            out_dim: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub aggregator: AggregatorConfig,
    pub stages: usize,
    pub layers_per_stage: usize,
    pub channels: usize,
    /// Layer `l` of every stage uses dilation `dilation_base^l`.
    pub dilation_base: usize,
    pub target_mode: TargetMode,
    pub similarity: SimilarityMeasure,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            input_dim: 16,
            aggregator: AggregatorConfig::default(),
            stages: 2,
            layers_per_stage: 8,
            channels: 32,
            dilation_base: 2,
            target_mode: TargetMode::Start,
            similarity: SimilarityMeasure::default(),
            lambda: DEFAULT_LAMBDA,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("aggregator.kernel_size", self.aggregator.kernel_size),
            ("aggregator.out_dim", self.aggregator.out_dim),
            ("stages", self.stages),
            ("layers_per_stage", self.layers_per_stage),
            ("channels", self.channels),
            ("dilation_base", self.dilation_base),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidValue(format!("{name} must be >= 1")));
            }
        }
        if self.aggregator.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidValue(format!(
                "aggregator.kernel_size must be odd, got {}",
                self.aggregator.kernel_size
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidValue(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        self.similarity.validate()?;
        for l in 0..self.layers_per_stage {
            self.dilation(l)?;
        }
        Ok(())
    }

    fn dilation(&self, layer: usize) -> Result<usize> {
        u32::try_from(layer)
            .ok()
            .and_then(|l| self.dilation_base.checked_pow(l))
            .ok_or_else(|| Error::InvalidValue(format!("dilation of layer {layer} overflows")))
    }

    /// Frames on either side of an output frame that can influence it.
    pub fn receptive_radius(&self) -> usize {
        let per_stage: usize = (0..self.layers_per_stage)
            .map(|l| self.dilation(l).unwrap_or(usize::MAX))
            .fold(0usize, |a, d| a.saturating_add(d));
        ((self.aggregator.kernel_size - 1) / 2).saturating_add(per_stage.saturating_mul(self.stages))
    }
}

/// Named parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(name: impl Into<String>, dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            name: name.into(),
            dims,
            data: vec![T::zero(); len],
        }
    }

    pub fn zeros_like(other: &Tensor<T>) -> Self {
        Self::zeros(other.name.clone(), other.dims.clone())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvParams {
    pub shape: ConvShape,
    pub weight: usize,
    pub bias: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct StageLayout {
    pub input: ConvParams,
    /// (dilated kernel-3 conv, pointwise conv) per residual layer
    pub layers: Vec<(ConvParams, ConvParams)>,
    pub head: ConvParams,
}

/// Where each layer's tensors live in the flat parameter list.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub aggregator: ConvParams,
    pub stages: Vec<StageLayout>,
    pub specs: Vec<(String, Vec<usize>, usize)>,
}

impl Layout {
    pub fn new(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let mut specs = Vec::new();
        let mut add = |name: String, shape: ConvShape| {
            let weight = specs.len();
            specs.push((format!("{name}.weight"), shape.weight_dims(), shape.fan_in()));
            specs.push((format!("{name}.bias"), vec![shape.out_dim], shape.fan_in()));
            ConvParams {
                shape,
                weight,
                bias: weight + 1,
            }
        };
        let aggregator = add(
            "aggregator".into(),
            ConvShape {
                in_dim: cfg.input_dim,
                out_dim: cfg.aggregator.out_dim,
                kernel: cfg.aggregator.kernel_size,
                dilation: 1,
            },
        );
        let mut stages = Vec::with_capacity(cfg.stages);
        for s in 0..cfg.stages {
            let in_dim = if s == 0 { cfg.aggregator.out_dim } else { 1 };
            let input = add(format!("stage{s}.input"), ConvShape::pointwise(in_dim, cfg.channels));
            let mut layers = Vec::with_capacity(cfg.layers_per_stage);
            for l in 0..cfg.layers_per_stage {
                let dilated = add(
                    format!("stage{s}.layer{l}.dilated"),
                    ConvShape {
                        in_dim: cfg.channels,
                        out_dim: cfg.channels,
                        kernel: 3,
                        dilation: cfg.dilation(l)?,
                    },
                );
                let pointwise = add(
                    format!("stage{s}.layer{l}.pointwise"),
                    ConvShape::pointwise(cfg.channels, cfg.channels),
                );
                layers.push((dilated, pointwise));
            }
            let head = add(format!("stage{s}.head"), ConvShape::pointwise(cfg.channels, 1));
            stages.push(StageLayout { input, layers, head });
        }
        Ok(Self {
            aggregator,
            stages,
            specs,
        })
    }
}

/// Parameters plus optimizer state.
#[derive(Debug, Clone)]
pub struct NetworkState<T> {
    config: NetworkConfig,
    params: Vec<Tensor<T>>,
    pub adam: AdamState<T>,
    // bumped on every parameter mutation; forward caches record it
    generation: u64,
}

impl<T: PartialEq> PartialEq for NetworkState<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params && self.adam == other.adam
    }
}

impl<T: Scalar> NetworkState<T> {
    /// Uniform init in `±sqrt(1 / fan_in)` from `config.seed`.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        let layout = Layout::new(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params: Vec<Tensor<T>> = layout
            .specs
            .iter()
            .map(|(name, dims, fan_in)| {
                let bound = (1.0 / *fan_in as f64).sqrt();
                let mut t = Tensor::zeros(name.clone(), dims.clone());
                for v in t.data.iter_mut() {
                    *v = T::lit(rng.random_range(-bound..bound));
                }
                t
            })
            .collect();
        let adam = AdamState::new(&params);
        Ok(Self {
            config,
            params,
            adam,
            generation: 0,
        })
    }

    pub(crate) fn from_parts(config: NetworkConfig, params: Vec<Tensor<T>>, adam: AdamState<T>) -> Result<Self> {
        let layout = Layout::new(&config)?;
        if params.len() != layout.specs.len() {
            return Err(Error::Dimension(format!(
                "expected {} parameter tensors, got {}",
                layout.specs.len(),
                params.len()
            )));
        }
        for (p, (name, dims, _)) in params.iter().zip(&layout.specs) {
            if &p.name != name || &p.dims != dims || p.data.len() != dims.iter().product::<usize>() {
                return Err(Error::Dimension(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {dims:?}",
                    p.name, p.dims
                )));
            }
        }
        adam.check_matches(&params)?;
        Ok(Self {
            config,
            params,
            adam,
            generation: 0,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        self.generation += 1;
        &mut self.params
    }

    pub(crate) fn generation(&self) -> u64 {
        self.generation
    }

    /// Mutable access to one parameter tensor; bumps the generation so
    /// outstanding forward caches become stale.
    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.generation += 1;
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Sets lambda, similarity and target mode without touching parameters.
    pub fn with_objective(mut self, lambda: f64, similarity: SimilarityMeasure, target_mode: TargetMode) -> Result<Self> {
        self.config.lambda = lambda;
        self.config.similarity = similarity;
        self.config.target_mode = target_mode;
        self.config.validate()?;
        Ok(self)
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.config).expect("config validated at construction")
    }

    pub fn cast<U: Scalar>(&self) -> NetworkState<U> {
        let cast = |ts: &[Tensor<T>]| -> Vec<Tensor<U>> {
            ts.iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    dims: t.dims.clone(),
                    data: t.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
                })
                .collect()
        };
        NetworkState {
            config: self.config.clone(),
            params: cast(&self.params),
            adam: AdamState {
                step: self.adam.step,
                first_moment: cast(&self.adam.first_moment),
                second_moment: cast(&self.adam.second_moment),
            },
            generation: self.generation,
        }
    }
}

/// Parameter gradients, aligned with [`NetworkState::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(state: &NetworkState<T>) -> Self {
        Self {
            tensors: state.params.iter().map(Tensor::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x *= factor;
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| *v == T::zero()))
    }
}

//! Repetition counting from per-frame feature sequences.
//!
//! A small temporal network predicts, for every frame, the probability that
//! a repetition starts there. During training its intermediate embeddings
//! are pulled towards a reference self-similarity structure built from the
//! annotations. Counts are read off the predicted series as the number of
//! sufficiently prominent peaks.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the command-line tool.

pub mod cli;
pub mod counting;
pub mod data;
pub mod error;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod render;
pub mod scalar;
pub mod similarity;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

/// Precision used for training, checkpoints and inference.
pub type Real = f32;

pub type Embeddings = data::EmbeddingSequence<Real>;
pub type Embeddings64 = data::EmbeddingSequence<f64>;
pub type Network = network::NetworkState<Real>;
pub type Network64 = network::NetworkState<f64>;
pub type Probabilities = counting::ProbabilitySeries<Real>;
pub type Tsm = similarity::SimilarityMatrix<Real>;
pub type Tsm64 = similarity::SimilarityMatrix<f64>;
pub type TrainingSample = network::Sample<Real>;

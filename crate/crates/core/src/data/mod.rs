//! Feature sequences, repetition annotations, a synthetic generator that
//! produces both, and their on-disk formats.

mod io;
mod synth;

pub use io::{
    annotations_from_json, annotations_to_json, decode_embeddings, encode_embeddings,
    read_annotations, read_embeddings, write_annotations, write_atomic, write_embeddings,
    ANNOTATION_SCHEMA_EXAMPLE, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use synth::{derive_seed, generate_sequence, SyntheticSpec};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// `T x D` per-frame features, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence<T> {
    frames: Matrix<T>,
}

impl<T: Scalar> EmbeddingSequence<T> {
    pub fn new(frames: Matrix<T>) -> Result<Self> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::Dimension(format!(
                "embedding sequence must be at least 1x1, got {}x{}",
                frames.rows(),
                frames.cols()
            )));
        }
        if let Some(pos) = frames.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite embedding value at frame {}, dim {}",
                pos / frames.cols(),
                pos % frames.cols()
            )));
        }
        Ok(Self { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn frames(&self) -> &Matrix<T> {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[T] {
        self.frames.row(t)
    }

    /// Keeps frames `0, stride, 2*stride, ...`.
    pub fn subsample(&self, stride: usize) -> Self {
        Self {
            frames: self.frames.subsample_rows(stride),
        }
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingSequence<U> {
        EmbeddingSequence {
            frames: self.frames.cast(),
        }
    }
}

/// Inclusive, 0-indexed repetition intervals over a sequence of `total_frames`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationTrack {
    total_frames: usize,
    intervals: Vec<(usize, usize)>,
}

impl AnnotationTrack {
    /// Validates ordering, range and overlap; the error names the first bad interval.
    pub fn new(total_frames: usize, intervals: Vec<(usize, usize)>) -> Result<Self> {
        for (index, &(start, end)) in intervals.iter().enumerate() {
            let bad = |reason: &str| Error::Annotation {
                index,
                start,
                end,
                reason: reason.to_string(),
            };
            if end < start {
                return Err(bad("end precedes start"));
            }
            if end >= total_frames {
                return Err(bad(&format!("index out of range for {total_frames} frames")));
            }
            if index > 0 {
                let (prev_start, prev_end) = intervals[index - 1];
                if start < prev_start {
                    return Err(bad("intervals not sorted by start"));
                }
                if start <= prev_end {
                    return Err(bad(&format!(
                        "overlaps interval #{} ({prev_start}, {prev_end})",
                        index - 1
                    )));
                }
            }
        }
        Ok(Self {
            total_frames,
            intervals,
        })
    }

    pub fn empty(total_frames: usize) -> Self {
        Self {
            total_frames,
            intervals: Vec::new(),
        }
    }

    pub fn total_frames(&self) -> usize {
        self.total_frames
    }

    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn count(&self) -> usize {
        self.intervals.len()
    }

    pub fn starts(&self) -> impl Iterator<Item = usize> + '_ {
        self.intervals.iter().map(|&(s, _)| s)
    }

    /// Maps the track onto frames `0, stride, 2*stride, ...`: frame `f` becomes
    /// `f / stride`. Intervals that collide after flooring are trimmed so the
    /// earlier one ends just before the later one starts; an interval whose
    /// start collides with the previous start is dropped.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let total_frames = self.total_frames.div_ceil(stride);
        let mut intervals: Vec<(usize, usize)> = Vec::with_capacity(self.intervals.len());
        for &(s, e) in &self.intervals {
            let (s, e) = (s / stride, e / stride);
            if let Some(last) = intervals.last_mut() {
                if s <= last.0 {
                    continue;
                }
                if s <= last.1 {
                    last.1 = s - 1;
                }
            }
            intervals.push((s, e));
        }
        Self {
            total_frames,
            intervals,
        }
    }
}

//! Start/periodicity targets, local peaks with topographic prominence, and
//! the repetition count read off a probability series.

use serde::{Deserialize, Serialize};

use crate::data::AnnotationTrack;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_TARGET_SIGMA: f64 = 1.0;
pub const DEFAULT_PROMINENCE_THRESHOLD: f64 = 0.2;

/// Per-frame values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySeries<T> {
    values: Vec<T>,
}

impl<T: Scalar> ProbabilitySeries<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::InvalidValue(format!(
                "probability at frame {i} is {v}, expected a finite value in [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![T::zero(); len],
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// Narrow Gaussian bump at every repetition start.
    #[default]
    Start,
    /// 1 inside any annotated repetition, 0 elsewhere.
    Periodicity,
}

impl TargetMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "start" => Ok(TargetMode::Start),
            "periodicity" => Ok(TargetMode::Periodicity),
            other => Err(Error::InvalidValue(format!("unknown target mode `{other}`"))),
        }
    }
}

/// Training target for a track. Start mode places `exp(-(t-s)^2 / 2 sigma^2)`
/// around each start `s`, truncated beyond `ceil(3 sigma)` frames and merged by
/// pointwise max.
pub fn make_target<T: Scalar>(
    track: &AnnotationTrack,
    mode: TargetMode,
    sigma: f64,
) -> Result<ProbabilitySeries<T>> {
    let n = track.total_frames();
    let mut out = vec![0.0f64; n];
    match mode {
        TargetMode::Start => {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::InvalidValue(format!(
                    "target sigma must be finite and >= 0, got {sigma}"
                )));
            }
            let radius = (3.0 * sigma).ceil() as usize;
            for s in track.starts() {
                for t in s.saturating_sub(radius)..=(s + radius).min(n - 1) {
                    let d = t.abs_diff(s) as f64;
                    let v = if d == 0.0 {
                        1.0
                    } else {
                        (-d * d / (2.0 * sigma * sigma)).exp()
                    };
                    out[t] = out[t].max(v);
                }
            }
        }
        TargetMode::Periodicity => {
            for &(s, e) in track.intervals() {
                out[s..=e].fill(1.0);
            }
        }
    }
    ProbabilitySeries::new(out.into_iter().map(|v| T::lit(v.clamp(0.0, 1.0))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    pub index: usize,
    pub height: T,
    pub prominence: T,
    pub left_base: usize,
    pub right_base: usize,
}

/// Local maxima with their prominences, in index order.
///
/// A peak is a sample (or the midpoint of a run of equal samples, rounded
/// left) whose neighbours on both sides are strictly lower; the first and
/// last samples are never peaks. Each side's base is the lowest sample
/// between the peak and the first strictly higher sample (or the series
/// end), nearest the peak on ties.
pub fn find_peaks<T: Scalar>(series: &[T]) -> Vec<Peak<T>> {
    let n = series.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    let mut i = 1;
    while i < n - 1 {
        if series[i - 1] < series[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && series[ahead] == series[i] {
                ahead += 1;
            }
            if series[ahead] < series[i] {
                let index = (i + ahead - 1) / 2;
                peaks.push(prominence_at(series, index));
                i = ahead;
                continue;
            }
            i = ahead;
            continue;
        }
        i += 1;
    }
    peaks
}

fn prominence_at<T: Scalar>(series: &[T], index: usize) -> Peak<T> {
    let height = series[index];
    let mut left_base = index;
    for k in (0..index).rev() {
        if series[k] > height {
            break;
        }
        if series[k] < series[left_base] {
            left_base = k;
        }
    }
    let mut right_base = index;
    for k in index + 1..series.len() {
        if series[k] > height {
            break;
        }
        if series[k] < series[right_base] {
            right_base = k;
        }
    }
    let base = series[left_base].max(series[right_base]);
    Peak {
        index,
        height,
        prominence: height - base,
        left_base,
        right_base,
    }
}

/// Number of peaks whose prominence is strictly above `threshold`, and those peaks.
pub fn count_repetitions<T: Scalar>(series: &[T], threshold: T) -> (usize, Vec<Peak<T>>) {
    let kept: Vec<Peak<T>> = find_peaks(series)
        .into_iter()
        .filter(|p| p.prominence > threshold)
        .collect();
    (kept.len(), kept)
}

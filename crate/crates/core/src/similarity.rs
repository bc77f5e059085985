//! Temporal self-similarity matrices: the predicted TSM over learned
//! embeddings (with its exact backward pass) and the reference TSM built
//! from repetition annotations.

use serde::{Deserialize, Serialize};

use crate::data::{AnnotationTrack, EmbeddingSequence};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{sign0, Scalar};

pub const DEFAULT_HAMMING_BETA: f64 = 4.0;
pub const DEFAULT_REFERENCE_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SimilarityMeasure {
    /// Negative soft Hamming distance `-(1/D) sum tanh(beta |a_d - b_d|)`.
    Hamming { beta: f64 },
    /// Negative Euclidean distance.
    Euclidean,
    /// Pearson correlation; 0 if either vector is constant.
    Correlation,
}

impl Default for SimilarityMeasure {
    fn default() -> Self {
        SimilarityMeasure::Hamming {
            beta: DEFAULT_HAMMING_BETA,
        }
    }
}

impl SimilarityMeasure {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SimilarityMeasure::Hamming { beta } if !(beta.is_finite() && beta > 0.0) => Err(
                Error::InvalidValue(format!("hamming beta must be finite and > 0, got {beta}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SimilarityMeasure::Hamming { .. } => "hamming",
            SimilarityMeasure::Euclidean => "euclidean",
            SimilarityMeasure::Correlation => "correlation",
        }
    }

    /// Parses `hamming`, `euclidean` or `correlation`; hamming gets the default beta.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "hamming" => Ok(Self::default()),
            "euclidean" => Ok(SimilarityMeasure::Euclidean),
            "correlation" => Ok(SimilarityMeasure::Correlation),
            other => Err(Error::InvalidValue(format!("unknown similarity measure `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsmKind {
    Predicted,
    Reference,
}

/// `T x T` matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    values: Matrix<T>,
    kind: TsmKind,
}

impl<T: Scalar> SimilarityMatrix<T> {
    pub fn from_values(values: Matrix<T>, kind: TsmKind) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(Error::Dimension(format!(
                "similarity matrix must be square, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if let Some(v) = values
            .as_slice()
            .iter()
            .find(|v| !(**v >= T::zero() && **v <= T::one()))
        {
            return Err(Error::InvalidValue(format!("similarity entry {v} outside [0, 1]")));
        }
        Ok(Self { values, kind })
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn kind(&self) -> TsmKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values.get(i, j)
    }
}

pub fn raw_similarity<T: Scalar>(a: &[T], b: &[T], m: SimilarityMeasure) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "similarity of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("non-finite vector entry".into()));
    }
    m.validate()?;
    let stats = (m == SimilarityMeasure::Correlation).then(|| (Centered::new(a), Centered::new(b)));
    Ok(match stats {
        Some((ca, cb)) => correlation(&ca, &cb),
        None => pair_similarity(a, b, m),
    })
}

#[inline]
fn pair_similarity<T: Scalar>(a: &[T], b: &[T], m: SimilarityMeasure) -> T {
    match m {
        SimilarityMeasure::Hamming { beta } => {
            let two_beta = T::lit(2.0 * beta);
            let s: T = a.iter().zip(b).map(|(&x, &y)| soft_step(two_beta * (x - y).abs())).sum();
            -s / T::from_usize_lossy(a.len())
        }
        SimilarityMeasure::Euclidean => {
            let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
            -s.sqrt()
        }
        SimilarityMeasure::Correlation => unreachable!("correlation uses centered stats"),
    }
}

/// `tanh(z / 2)` for `z >= 0`, as `expm1(z) / (expm1(z) + 2)`: cheaper than
/// `tanh` and still accurate near zero.
#[inline]
fn soft_step<T: Scalar>(z: T) -> T {
    let e = z.exp_m1();
    if e.is_finite() {
        e / (e + T::lit(2.0))
    } else {
        T::one()
    }
}

/// Mean-centered copy of a vector and its norm.
struct Centered<T> {
    values: Vec<T>,
    norm: T,
    constant: bool,
}

impl<T: Scalar> Centered<T> {
    fn new(v: &[T]) -> Self {
        let mean = v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len());
        let values: Vec<T> = v.iter().map(|&x| x - mean).collect();
        let norm = values.iter().map(|&x| x * x).sum::<T>().sqrt();
        let constant = v.iter().all(|&x| x == v[0]) || norm == T::zero();
        Self {
            values,
            norm,
            constant,
        }
    }

    fn is_constant(&self) -> bool {
        self.constant
    }
}

fn correlation<T: Scalar>(a: &Centered<T>, b: &Centered<T>) -> T {
    if a.is_constant() || b.is_constant() {
        return T::zero();
    }
    let dot: T = a.values.iter().zip(&b.values).map(|(&x, &y)| x * y).sum();
    dot / (a.norm * b.norm)
}

/// Row statistics needed by [`tsm_backward`].
#[derive(Debug, Clone)]
pub struct TsmCache<T> {
    raw: Matrix<T>,
    row_min: Vec<usize>,
    row_max: Vec<usize>,
    centered: Option<Vec<Centered<T>>>,
    /// Hamming only: `tanh(beta |a_d - b_d|)` for every pair `i < j`, row-major over pairs.
    soft: Option<Vec<T>>,
}

impl<T: Scalar> TsmCache<T> {
    /// Raw (pre-normalization) similarities `f(i, j)`.
    pub fn raw(&self) -> &Matrix<T> {
        &self.raw
    }

    /// Index of the first minimum / maximum of each raw row.
    pub fn extrema(&self) -> (&[usize], &[usize]) {
        (&self.row_min, &self.row_max)
    }
}

impl<T: Clone> Clone for Centered<T> {
    fn clone(&self) -> Self {
        Self {
            values: self.values.clone(),
            norm: self.norm.clone(),
            constant: self.constant,
        }
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Centered<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Centered").field("norm", &self.norm).finish()
    }
}

/// Predicted TSM: raw pairwise similarity followed by row-wise min-max
/// normalization. Rows with `max == min` become all `0.5`.
pub fn predicted_tsm<T: Scalar>(
    seq: &EmbeddingSequence<T>,
    m: SimilarityMeasure,
) -> Result<SimilarityMatrix<T>> {
    Ok(tsm_forward(seq.frames(), m)?.0)
}

/// [`predicted_tsm`] over a raw feature matrix, keeping what the backward pass needs.
pub fn tsm_forward<T: Scalar>(
    features: &Matrix<T>,
    m: SimilarityMeasure,
) -> Result<(SimilarityMatrix<T>, TsmCache<T>)> {
    m.validate()?;
    if !features.is_finite() {
        return Err(Error::InvalidValue("non-finite embedding".into()));
    }
    let n = features.rows();
    let centered = (m == SimilarityMeasure::Correlation)
        .then(|| (0..n).map(|i| Centered::new(features.row(i))).collect::<Vec<_>>());

    let mut raw = Matrix::zeros(n, n);
    let mut soft = None;
    if let SimilarityMeasure::Hamming { beta } = m {
        let dim = features.cols();
        let beta = T::lit(beta);
        let inv_dim = T::one() / T::from_usize_lossy(dim);
        let two_beta = T::lit(2.0) * beta;
        let mut buf = Vec::with_capacity(n * n.saturating_sub(1) / 2 * dim);
        for i in 0..n {
            raw.set(i, i, T::zero());
            let a = features.row(i);
            for j in (i + 1)..n {
                let mut s = T::zero();
                for (&x, &y) in a.iter().zip(features.row(j)) {
                    let t = soft_step(two_beta * (x - y).abs());
                    buf.push(t);
                    s += t;
                }
                let f = -s * inv_dim;
                raw.set(i, j, f);
                raw.set(j, i, f);
            }
        }
        soft = Some(buf);
    } else {
        for i in 0..n {
            for j in i..n {
                let f = match &centered {
                    Some(c) => correlation(&c[i], &c[j]),
                    None => pair_similarity(features.row(i), features.row(j), m),
                };
                raw.set(i, j, f);
                raw.set(j, i, f);
            }
        }
    }

    let (out, row_min, row_max) = normalize_rows(&raw);
    Ok((
        SimilarityMatrix {
            values: out,
            kind: TsmKind::Predicted,
        },
        TsmCache {
            raw,
            row_min,
            row_max,
            centered,
            soft,
        },
    ))
}

/// Row-wise min-max normalization of raw similarities. Rows with
/// `max == min` become all `0.5`.
pub fn minmax_normalize<T: Scalar>(raw: &Matrix<T>) -> Result<SimilarityMatrix<T>> {
    if raw.rows() != raw.cols() || !raw.is_finite() {
        return Err(Error::InvalidValue("raw similarities must be square and finite".into()));
    }
    Ok(SimilarityMatrix {
        values: normalize_rows(raw).0,
        kind: TsmKind::Predicted,
    })
}

/// Normalized rows plus the first argmin and argmax of each raw row.
fn normalize_rows<T: Scalar>(raw: &Matrix<T>) -> (Matrix<T>, Vec<usize>, Vec<usize>) {
    let n = raw.rows();
    let mut out = Matrix::zeros(n, raw.cols());
    let mut row_min = Vec::with_capacity(n);
    let mut row_max = Vec::with_capacity(n);
    let half = T::lit(0.5);
    for i in 0..n {
        let row = raw.row(i);
        let (mut lo, mut hi) = (0, 0);
        for (k, &v) in row.iter().enumerate() {
            if v < row[lo] {
                lo = k;
            }
            if v > row[hi] {
                hi = k;
            }
        }
        let (min, max) = (row[lo], row[hi]);
        let range = max - min;
        let dst = out.row_mut(i);
        if range > T::zero() {
            for (d, &v) in dst.iter_mut().zip(row) {
                *d = ((v - min) / range).max(T::zero()).min(T::one());
            }
        } else {
            dst.fill(half);
        }
        row_min.push(lo);
        row_max.push(hi);
    }
    (out, row_min, row_max)
}

/// Gradient of a scalar loss w.r.t. the features, given its gradient
/// w.r.t. the normalized TSM.
pub fn tsm_backward<T: Scalar>(
    features: &Matrix<T>,
    cache: &TsmCache<T>,
    m: SimilarityMeasure,
    d_tsm: &Matrix<T>,
) -> Result<Matrix<T>> {
    let n = features.rows();
    if cache.raw.rows() != n || d_tsm.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "tsm backward: features {}x{}, cache {}, gradient {}x{}",
            n,
            features.cols(),
            cache.raw.rows(),
            d_tsm.rows(),
            d_tsm.cols()
        )));
    }

    // d loss / d raw similarity
    let mut d_raw: Matrix<T> = Matrix::zeros(n, n);
    for i in 0..n {
        let row = cache.raw.row(i);
        let (lo, hi) = (cache.row_min[i], cache.row_max[i]);
        let (min, max) = (row[lo], row[hi]);
        let range = max - min;
        if !(range > T::zero()) {
            continue;
        }
        let inv = T::one() / range;
        let inv2 = inv * inv;
        let g = d_tsm.row(i);
        let mut d_min = T::zero();
        let mut d_max = T::zero();
        let dst = d_raw.row_mut(i);
        for j in 0..n {
            dst[j] += g[j] * inv;
            d_min += g[j] * (row[j] - max) * inv2;
            d_max -= g[j] * (row[j] - min) * inv2;
        }
        dst[lo] += d_min;
        dst[hi] += d_max;
    }

    // f is symmetric in its arguments, so frame i collects (d_ij + d_ji) * df/da(x_i, x_j).
    // Diagonal terms vanish: f(x, x) is constant for every measure.
    let dim = features.cols();
    let mut d_feat = Matrix::zeros(n, dim);
    let mut grad_a = vec![T::zero(); dim];
    let mut grad_b = vec![T::zero(); dim];
    if let (SimilarityMeasure::Hamming { beta }, Some(soft)) = (m, cache.soft.as_ref()) {
        let scale = -T::lit(beta) / T::from_usize_lossy(dim);
        let mut pair = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let ts = &soft[pair * dim..(pair + 1) * dim];
                pair += 1;
                let w = d_raw.get(i, j) + d_raw.get(j, i);
                if w == T::zero() {
                    continue;
                }
                let ws = w * scale;
                for d in 0..dim {
                    let diff = features.get(i, d) - features.get(j, d);
                    grad_a[d] = ws * (T::one() - ts[d] * ts[d]) * sign0(diff);
                }
                for (dst, g) in d_feat.row_mut(i).iter_mut().zip(&grad_a) {
                    *dst += *g;
                }
                for (dst, g) in d_feat.row_mut(j).iter_mut().zip(&grad_a) {
                    *dst -= *g;
                }
            }
        }
        return Ok(d_feat);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let w = d_raw.get(i, j) + d_raw.get(j, i);
            if w == T::zero() {
                continue;
            }
            pair_gradient(features, cache, m, i, j, &mut grad_a, &mut grad_b);
            for (d, g) in d_feat.row_mut(i).iter_mut().zip(&grad_a) {
                *d += w * *g;
            }
            for (d, g) in d_feat.row_mut(j).iter_mut().zip(&grad_b) {
                *d += w * *g;
            }
        }
    }
    Ok(d_feat)
}

/// Partial derivatives of `f(x_i, x_j)` w.r.t. `x_i` (into `ga`) and `x_j` (into `gb`).
fn pair_gradient<T: Scalar>(
    features: &Matrix<T>,
    cache: &TsmCache<T>,
    m: SimilarityMeasure,
    i: usize,
    j: usize,
    ga: &mut [T],
    gb: &mut [T],
) {
    let (a, b) = (features.row(i), features.row(j));
    match m {
        SimilarityMeasure::Hamming { beta } => {
            let beta = T::lit(beta);
            let scale = -beta / T::from_usize_lossy(a.len());
            for d in 0..a.len() {
                let diff = a[d] - b[d];
                let t = (beta * diff.abs()).tanh();
                let g = scale * (T::one() - t * t) * sign0(diff);
                ga[d] = g;
                gb[d] = -g;
            }
        }
        SimilarityMeasure::Euclidean => {
            let norm = a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x - y) * (x - y))
                .sum::<T>()
                .sqrt();
            for d in 0..a.len() {
                let g = if norm > T::zero() {
                    -(a[d] - b[d]) / norm
                } else {
                    T::zero()
                };
                ga[d] = g;
                gb[d] = -g;
            }
        }
        SimilarityMeasure::Correlation => {
            let c = cache.centered.as_ref().expect("correlation cache");
            let (ca, cb) = (&c[i], &c[j]);
            if ca.is_constant() || cb.is_constant() {
                ga.fill(T::zero());
                gb.fill(T::zero());
                return;
            }
            let r = cache.raw.get(i, j);
            let nab = ca.norm * cb.norm;
            let (na2, nb2) = (ca.norm * ca.norm, cb.norm * cb.norm);
            for d in 0..a.len() {
                ga[d] = cb.values[d] / nab - r * ca.values[d] / na2;
                gb[d] = ca.values[d] / nab - r * cb.values[d] / nb2;
            }
        }
    }
}

/// Cells touched by the segment `from -> to`: `max(|drow|, |dcol|) + 1`
/// equally spaced samples, each coordinate rounded half away from zero.
pub fn rasterize_line(from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
    let dr = to.0 as f64 - from.0 as f64;
    let dc = to.1 as f64 - from.1 as f64;
    let steps = dr.abs().max(dc.abs()) as usize;
    if steps == 0 {
        return vec![from];
    }
    (0..=steps)
        .map(|k| {
            let u = k as f64 / steps as f64;
            (
                (from.0 as f64 + dr * u).round() as usize,
                (from.1 as f64 + dc * u).round() as usize,
            )
        })
        .collect()
}

/// Binary reference TSM before smoothing: unit diagonal, start-start and
/// end-end alignments, and the warped line between every pair of repetitions.
pub fn reference_pattern(track: &AnnotationTrack) -> Vec<Vec<bool>> {
    let n = track.total_frames();
    let mut hit = vec![vec![false; n]; n];
    let mut mark = |r: usize, c: usize| {
        hit[r][c] = true;
        hit[c][r] = true;
    };
    for t in 0..n {
        mark(t, t);
    }
    let iv = track.intervals();
    for &(sa, ea) in iv {
        for &(sb, eb) in iv {
            mark(sa, sb);
            mark(ea, eb);
        }
    }
    for (a, &(sa, ea)) in iv.iter().enumerate() {
        for &(sb, eb) in &iv[a + 1..] {
            for (r, c) in rasterize_line((sa, sb), (ea, eb)) {
                mark(r, c);
            }
        }
    }
    hit
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable zero-padded blur along rows then columns.
fn blur(values: &[f64], n: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let cc = c as i64 + k as i64 - radius;
                if (0..n as i64).contains(&cc) {
                    acc += w * values[r * n + cc as usize];
                }
            }
            tmp[r * n + c] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let rr = r as i64 + k as i64 - radius;
                if (0..n as i64).contains(&rr) {
                    acc += w * tmp[rr as usize * n + c];
                }
            }
            out[r * n + c] = acc;
        }
    }
    out
}

/// Reference TSM from annotations. `smoothing` is the standard deviation
/// (in frames) of the Gaussian blur; `0` keeps the binary pattern. After
/// blurring, entries are symmetrized, clamped to `[0, 1]`, and the
/// pre-blur ones are restored exactly.
pub fn reference_tsm<T: Scalar>(track: &AnnotationTrack, smoothing: f64) -> Result<SimilarityMatrix<T>> {
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(Error::InvalidValue(format!(
            "reference smoothing must be finite and >= 0, got {smoothing}"
        )));
    }
    let n = track.total_frames();
    let hit = reference_pattern(track);
    let binary: Vec<f64> = hit
        .iter()
        .flat_map(|row| row.iter().map(|&h| if h { 1.0 } else { 0.0 }))
        .collect();
    let smoothed = if smoothing > 0.0 {
        blur(&binary, n, &gaussian_kernel(smoothing))
    } else {
        binary.clone()
    };
    let values = Matrix::from_fn(n, n, |r, c| {
        if hit[r][c] {
            T::one()
        } else {
            let v = (smoothed[r * n + c] + smoothed[c * n + r]) * 0.5;
            T::lit(v.clamp(0.0, 1.0))
        }
    });
    Ok(SimilarityMatrix {
        values,
        kind: TsmKind::Reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn identical_vectors() {
        let a = [0.3f64, -1.2, 2.0];
        assert_eq!(raw_similarity(&a, &a, SimilarityMeasure::Euclidean).unwrap(), 0.0);
        assert_eq!(raw_similarity(&a, &a, SimilarityMeasure::default()).unwrap(), 0.0);
        let r = raw_similarity(&a, &a, SimilarityMeasure::Correlation).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_hamming_value() {
        let v = raw_similarity(&[0.0, 0.0], &[1.0, 0.0], SimilarityMeasure::Hamming { beta: 4.0 })
            .unwrap();
        assert!((v - (-(4.0f64).tanh() / 2.0)).abs() < 1e-15);
        assert!((v + 0.49966).abs() < 1e-5);
    }

    #[test]
    fn constant_vector_correlates_zero_and_mismatch_errors() {
        let c = raw_similarity(&[2.0, 2.0, 2.0], &[1.0, 5.0, 0.0], SimilarityMeasure::Correlation)
            .unwrap();
        assert_eq!(c, 0.0);
        assert!(raw_similarity(&[1.0], &[1.0, 2.0], SimilarityMeasure::Euclidean).is_err());
        assert!(raw_similarity(&[1.0], &[1.0], SimilarityMeasure::Hamming { beta: 0.0 }).is_err());
    }

    #[test]
    fn single_frame_tsm_is_half() {
        let (s, _) = tsm_forward(&mat(1, 3, &[1.0, 2.0, 3.0]), SimilarityMeasure::default()).unwrap();
        assert_eq!(s.values().as_slice(), &[0.5]);
    }

    #[test]
    fn repeated_frame_normalizes_to_one() {
        let x = mat(3, 2, &[0.0, 1.0, 3.0, -1.0, 0.0, 1.0]);
        let (s, _) = tsm_forward(&x, SimilarityMeasure::Euclidean).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        assert_eq!(s.get(0, 2), 1.0);
        assert_eq!(s.get(0, 1), 0.0);
    }

    #[test]
    fn empty_reference_is_identity() {
        let s: SimilarityMatrix<f64> = reference_tsm(&AnnotationTrack::empty(4), 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn rasterized_line_endpoints_and_density() {
        assert_eq!(rasterize_line((2, 2), (2, 2)), vec![(2, 2)]);
        assert_eq!(rasterize_line((0, 3), (1, 4)), vec![(0, 3), (1, 4)]);
        let cells = rasterize_line((0, 4), (3, 8));
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[0], (0, 4));
        assert_eq!(cells[4], (3, 8));
    }

    #[test]
    fn smoothing_keeps_diagonal_dominant() {
        let track = AnnotationTrack::new(20, vec![(2, 6), (7, 12), (14, 19)]).unwrap();
        let s: SimilarityMatrix<f64> = reference_tsm(&track, 1.0).unwrap();
        for i in 0..20 {
            assert_eq!(s.get(i, i), 1.0);
            for j in 0..20 {
                assert!(s.get(i, j) <= s.get(i, i));
                assert_eq!(s.get(i, j), s.get(j, i));
            }
        }
        // smoothing spreads mass off the binary pattern
        assert!(s.get(2, 8) > 0.0 && s.get(2, 8) < 1.0);
    }
}

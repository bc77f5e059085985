//! Same-length 1-D convolution over time-major `T x C` matrices, zero padded.
//!
//! Weights are laid out `[kernel][out][in]` so that each tap is a row-major
//! `out x in` matrix applied to one shifted input frame.

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl ConvShape {
    pub fn pointwise(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            kernel: 1,
            dilation: 1,
        }
    }

    pub fn weight_dims(&self) -> Vec<usize> {
        vec![self.kernel, self.out_dim, self.in_dim]
    }

    pub fn fan_in(&self) -> usize {
        self.in_dim * self.kernel
    }

    #[inline]
    fn offset(&self, tap: usize) -> isize {
        (tap as isize - ((self.kernel - 1) / 2) as isize) * self.dilation as isize
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // Eight independent accumulators let the compiler vectorize.
    let mut lanes = [T::zero(); 8];
    let split = a.len().min(b.len()) / 8 * 8;
    for (ca, cb) in a[..split].chunks_exact(8).zip(b[..split].chunks_exact(8)) {
        for k in 0..8 {
            lanes[k] += ca[k] * cb[k];
        }
    }
    let mut acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (x, y) in a[split..].iter().zip(&b[split..]) {
        acc += *x * *y;
    }
    acc
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * *xv;
    }
}

pub(crate) fn forward<T: Scalar>(shape: ConvShape, weight: &[T], bias: &[T], input: &Matrix<T>) -> Matrix<T> {
    debug_assert_eq!(input.cols(), shape.in_dim);
    let frames = input.rows();
    let tap_len = shape.out_dim * shape.in_dim;
    let mut out = Matrix::zeros(frames, shape.out_dim);
    for t in 0..frames {
        let dst = out.row_mut(t);
        dst.copy_from_slice(bias);
        for tap in 0..shape.kernel {
            let src = t as isize + shape.offset(tap);
            if src < 0 || src >= frames as isize {
                continue;
            }
            let x = input.row(src as usize);
            let w = &weight[tap * tap_len..(tap + 1) * tap_len];
            for (o, d) in dst.iter_mut().enumerate() {
                *d += dot(&w[o * shape.in_dim..(o + 1) * shape.in_dim], x);
            }
        }
    }
    out
}

/// Accumulates parameter gradients into `d_weight`/`d_bias` and, if given,
/// the input gradient into `d_input`.
pub(crate) fn backward<T: Scalar>(
    shape: ConvShape,
    weight: &[T],
    input: &Matrix<T>,
    d_out: &Matrix<T>,
    d_weight: &mut [T],
    d_bias: &mut [T],
    mut d_input: Option<&mut Matrix<T>>,
) {
    let frames = input.rows();
    let tap_len = shape.out_dim * shape.in_dim;
    for t in 0..frames {
        let g = d_out.row(t);
        for (db, &gv) in d_bias.iter_mut().zip(g) {
            *db += gv;
        }
        for tap in 0..shape.kernel {
            let src = t as isize + shape.offset(tap);
            if src < 0 || src >= frames as isize {
                continue;
            }
            let src = src as usize;
            let x = input.row(src);
            let w = &weight[tap * tap_len..(tap + 1) * tap_len];
            let dw = &mut d_weight[tap * tap_len..(tap + 1) * tap_len];
            for (o, &gv) in g.iter().enumerate() {
                if gv == T::zero() {
                    continue;
                }
                axpy(gv, x, &mut dw[o * shape.in_dim..(o + 1) * shape.in_dim]);
            }
            if let Some(di) = d_input.as_deref_mut() {
                let dst = di.row_mut(src);
                for (o, &gv) in g.iter().enumerate() {
                    if gv == T::zero() {
                        continue;
                    }
                    axpy(gv, &w[o * shape.in_dim..(o + 1) * shape.in_dim], dst);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilated_taps_read_shifted_frames_with_zero_padding() {
        let shape = ConvShape {
            in_dim: 1,
            out_dim: 1,
            kernel: 3,
            dilation: 2,
        };
        // taps: x[t-2], x[t], x[t+2]
        let w = [1.0, 10.0, 100.0];
        let x = Matrix::from_vec(5, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = forward(shape, &w, &[0.5], &x);
        assert_eq!(y.as_slice(), &[310.5, 420.5, 531.5, 40.5 + 2.0, 50.5 + 3.0]);
    }
}

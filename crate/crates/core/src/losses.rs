//! Masked TSM consistency loss, start-prediction SSE, and their combination.
//! Losses are unreduced sums with exact gradients.

use serde::{Deserialize, Serialize};

use crate::counting::ProbabilitySeries;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::similarity::SimilarityMatrix;

pub const DEFAULT_LAMBDA: f64 = 1.0e-5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub sse: f64,
    pub treco: f64,
    pub total: f64,
    pub lambda: f64,
}

/// `sum (S - S_ref)^2` over entries where `S_ref != 0`, and its gradient w.r.t. `S`.
pub fn treco_loss<T: Scalar>(
    predicted: &SimilarityMatrix<T>,
    reference: &SimilarityMatrix<T>,
) -> Result<(T, Matrix<T>)> {
    let (s, r) = (predicted.values(), reference.values());
    if s.shape() != r.shape() {
        return Err(Error::Dimension(format!(
            "tReCo loss between {:?} and {:?} matrices",
            s.shape(),
            r.shape()
        )));
    }
    let mut grad = Matrix::zeros(s.rows(), s.cols());
    let mut loss = T::zero();
    for ((g, &sv), &rv) in grad.as_mut_slice().iter_mut().zip(s.as_slice()).zip(r.as_slice()) {
        if rv != T::zero() {
            let d = sv - rv;
            loss += d * d;
            *g = d + d;
        }
    }
    Ok((loss, grad))
}

/// `sum (a_i - â_i)^2` and its gradient w.r.t. the prediction `â`.
pub fn sse_loss<T: Scalar>(
    target: &ProbabilitySeries<T>,
    predicted: &ProbabilitySeries<T>,
) -> Result<(T, Vec<T>)> {
    if target.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "SSE loss between series of length {} and {}",
            target.len(),
            predicted.len()
        )));
    }
    let mut loss = T::zero();
    let grad = target
        .values()
        .iter()
        .zip(predicted.values())
        .map(|(&a, &p)| {
            let d = a - p;
            loss += d * d;
            -(d + d)
        })
        .collect();
    Ok((loss, grad))
}

pub fn total_loss(sse: f64, treco: f64, lambda: f64) -> Result<LossReport> {
    for (name, v) in [("sse", sse), ("treco", treco), ("lambda", lambda)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidValue(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    Ok(LossReport {
        sse,
        treco,
        total: sse + lambda * treco,
        lambda,
    })
}

impl LossReport {
    /// Componentwise mean of a set of reports sharing one lambda.
    pub fn mean(reports: &[LossReport]) -> LossReport {
        if reports.is_empty() {
            return LossReport::default();
        }
        let n = reports.len() as f64;
        let sse = reports.iter().map(|r| r.sse).sum::<f64>() / n;
        let treco = reports.iter().map(|r| r.treco).sum::<f64>() / n;
        let lambda = reports[0].lambda;
        LossReport {
            sse,
            treco,
            total: sse + lambda * treco,
            lambda,
        }
    }
}

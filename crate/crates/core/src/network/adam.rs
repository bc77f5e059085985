use super::{Gradients, NetworkState, Tensor, TrainConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam moment buffers, aligned with the parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        Self {
            step: 0,
            first_moment: params.iter().map(Tensor::zeros_like).collect(),
            second_moment: params.iter().map(Tensor::zeros_like).collect(),
        }
    }

    pub(crate) fn check_matches(&self, params: &[Tensor<T>]) -> Result<()> {
        for moments in [&self.first_moment, &self.second_moment] {
            if moments.len() != params.len()
                || moments.iter().zip(params).any(|(m, p)| m.dims != p.dims)
            {
                return Err(Error::Dimension("adam moments do not match parameters".into()));
            }
        }
        Ok(())
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before anything is modified.
pub fn adam_step<T: Scalar>(state: &mut NetworkState<T>, grads: &Gradients<T>, cfg: &TrainConfig) -> Result<()> {
    if grads.tensors.len() != state.params().len() {
        return Err(Error::Dimension(format!(
            "{} gradient tensors for {} parameters",
            grads.tensors.len(),
            state.params().len()
        )));
    }
    for (g, p) in grads.tensors.iter().zip(state.params()) {
        if g.dims != p.dims {
            return Err(Error::Dimension(format!(
                "gradient `{}` {:?} vs parameter `{}` {:?}",
                g.name, g.dims, p.name, p.dims
            )));
        }
        if g.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
    }

    let step = state.adam.step + 1;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let correction1 = T::one() - b1.powi(step.min(i32::MAX as u64) as i32);
    let correction2 = T::one() - b2.powi(step.min(i32::MAX as u64) as i32);
    let lr = T::lit(cfg.learning_rate);
    let eps = T::lit(cfg.epsilon);

    state.generation += 1;
    let adam = &mut state.adam;
    for (((p, g), m), v) in state
        .params
        .iter_mut()
        .zip(&grads.tensors)
        .zip(adam.first_moment.iter_mut())
        .zip(adam.second_moment.iter_mut())
    {
        for (((w, &gv), mv), vv) in p.data.iter_mut().zip(&g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
            *mv = b1 * *mv + (T::one() - b1) * gv;
            *vv = b2 * *vv + (T::one() - b2) * gv * gv;
            let m_hat = *mv / correction1;
            let v_hat = *vv / correction2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    adam.step = step;
    Ok(())
}

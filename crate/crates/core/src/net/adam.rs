use serde::{Deserialize, Serialize};

use super::params::{Grads, Params};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 2e-4, beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }
}

/// Moment accumulators keyed like the parameters they track.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: Params<T>,
    pub second: Params<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &Params<T>) -> Self {
        AdamState { first: Params::zeros_like(params), second: Params::zeros_like(params), step: 0 }
    }
}

/// One bias-corrected Adam update of every trainable tensor.
///
/// Gradients are checked for finiteness before anything is modified.
pub fn adam_step<T: Scalar>(
    params: &mut Params<T>,
    grads: &Grads<T>,
    state: &mut AdamState<T>,
    config: &AdamConfig,
) -> Result<()> {
    if !params.same_layout(grads) || !params.same_layout(&state.first) {
        return Err(Error::shape("parameters, gradients and optimizer state disagree"));
    }
    if let Some(bad) = grads.iter().find(|g| !g.value.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of {}", bad.name)));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::lit(config.beta1);
    let b2 = T::lit(config.beta2);
    let lr = T::lit(config.lr);
    let eps = T::lit(config.eps);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let tensors = params.iter_mut().zip(grads.iter()).zip(state.first.iter_mut().zip(state.second.iter_mut()));
    for ((p, g), (m, v)) in tensors {
        if !p.trainable {
            continue;
        }
        let it = p
            .value
            .data_mut()
            .iter_mut()
            .zip(g.value.data())
            .zip(m.value.data_mut().iter_mut().zip(v.value.data_mut().iter_mut()));
        for ((pv, &gv), (mv, vv)) in it {
            *mv = b1 * *mv + (T::one() - b1) * gv;
            *vv = b2 * *vv + (T::one() - b2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

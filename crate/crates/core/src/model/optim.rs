use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::params::{GradientSet, ParamSet};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: ParamSet<T>,
    pub v: ParamSet<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        Self {
            config,
            m: ParamSet::zeros_like(params),
            v: ParamSet::zeros_like(params),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &GradientSet<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<(), ModelError> {
    for (name, p) in params.iter() {
        let g = grads.get(name).ok_or_else(|| ModelError::MissingParam(name.to_string()))?;
        if g.shape() != p.shape() {
            return Err(ModelError::ShapeMismatch {
                what: format!("gradient of {name}"),
                expected: p.shape().to_vec(),
                found: g.shape().to_vec(),
            });
        }
    }
    if grads.len() != params.len() {
        return Err(ModelError::UnknownParam("gradient set has extra tensors".into()));
    }
    state.step += 1;
    let c = state.config;
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let bc1 = T::lit(1.0 - c.beta1.powi(state.step as i32));
    let bc2 = T::lit(1.0 - c.beta2.powi(state.step as i32));
    let (lr, eps) = (T::lit(lr), T::lit(c.eps));
    for (name, p) in params.iter_mut() {
        let g = grads.get(name).expect("checked above").data();
        let m = state.m.get_mut(name).expect("state matches params").data_mut();
        for (mi, &gi) in m.iter_mut().zip(g) {
            *mi = b1 * *mi + (T::one() - b1) * gi;
        }
        let v = state.v.get_mut(name).expect("state matches params").data_mut();
        for (vi, &gi) in v.iter_mut().zip(g) {
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
        }
        let m = state.m.get(name).expect("state matches params").data();
        let v = state.v.get(name).expect("state matches params").data();
        for ((pi, &mi), &vi) in p.data_mut().iter_mut().zip(m).zip(v) {
            let mhat = mi / bc1;
            let vhat = vi / bc2;
            *pi = *pi - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Exponential decay: `base · gamma^epoch`.
pub fn lr_schedule(base: f64, gamma: f64, epoch: usize) -> f64 {
    base * gamma.powi(epoch as i32)
}

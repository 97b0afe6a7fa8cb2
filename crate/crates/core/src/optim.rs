//! AdamW with decoupled weight decay.
//!
//! For each parameter tensor at step `t` (1-based):
//!
//! ```text
//! theta <- theta * (1 - lr * wd)            (weight matrices only)
//! m     <- b1 * m + (1 - b1) * g
//! v     <- b2 * v + (1 - b2) * g^2
//! theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//! ```
//!
//! Biases and fusion logits are never decayed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams, ParamKind, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-5,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for b in [self.beta1, self.beta2] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("beta must be in [0, 1), got {b}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.eps > 0.0) {
            return Err(Error::InvalidArgument("weight decay must be >= 0 and eps > 0".into()));
        }
        Ok(())
    }
}

/// Moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState<F> {
    pub step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> AdamWState<F> {
    pub fn new(params: &ModelParams<F>) -> Self {
        let zeros: Vec<Vec<F>> = params
            .tensors()
            .iter()
            .map(|(_, _, t)| vec![F::zero(); t.len()])
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Updates one tensor in place. `step` is the already-incremented step count.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update<F: Real>(
    theta: &mut [F],
    grad: &[F],
    m: &mut [F],
    v: &mut [F],
    step: u64,
    config: &AdamWConfig,
    decay: bool,
) {
    let lr = F::of(config.learning_rate);
    let b1 = F::of(config.beta1);
    let b2 = F::of(config.beta2);
    let eps = F::of(config.eps);
    let c1 = F::one() - F::of(config.beta1.powi(step as i32));
    let c2 = F::one() - F::of(config.beta2.powi(step as i32));
    let shrink = F::one() - F::of(config.learning_rate * config.weight_decay);
    for i in 0..theta.len() {
        if decay {
            theta[i] = theta[i] * shrink;
        }
        let g = grad[i];
        m[i] = b1 * m[i] + (F::one() - b1) * g;
        v[i] = b2 * v[i] + (F::one() - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] = theta[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One optimizer step over every tensor of `params`.
pub fn adamw_step<F: Real>(
    params: &mut ModelParams<F>,
    grads: &Gradients<F>,
    state: &mut AdamWState<F>,
    config: &AdamWConfig,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    if grad_tensors.len() != state.m.len() {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }
    for (name, _, g) in &grad_tensors {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { name: name.clone() });
        }
    }
    state.step += 1;
    let step = state.step;
    for (((_, kind, theta), (_, _, g)), (m, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(&grad_tensors)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let decay = kind == ParamKind::Weight && config.weight_decay > 0.0;
        adamw_update(theta, g, m, v, step, config, decay);
    }
    Ok(())
}

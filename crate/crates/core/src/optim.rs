//! Adam with L2-coupled weight decay.
//!
//! Per coordinate, with `t` counted from 1:
//!
//! ```text
//! g' = g + λ θ
//! m  = β1 m + (1 - β1) g'
//! v  = β2 v + (1 - β2) g'²
//! θ -= α (m / (1 - β1^t)) / (sqrt(v / (1 - β2^t)) + ε)
//! ```
//!
//! The decay is added to the gradient before the moment updates (classic
//! Adam "weight_decay"), not applied to the parameters directly (AdamW).
//! β1, β2 and ε default to 0.9, 0.999 and 1e-8.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            weight_decay,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    /// Zero moments shaped like `params`.
    pub fn new(params: &[&Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| p.zeros_like()).collect(),
            v: params.iter().map(|p| p.zeros_like()).collect(),
            t: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub state: AdamState,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        Adam {
            config,
            state: AdamState::new(params),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: Vec<&Tensor>) -> Result<()> {
        adam_step(params, &grads, &mut self.state, &self.config)
    }
}

/// One Adam update of `params` in place. Nothing is modified if the
/// gradients are non-finite or any shape disagrees.
pub fn adam_step(params: Vec<&mut Tensor>, grads: &[&Tensor], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::InvalidArgument(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        g.expect_shape(p.shape())?;
        m.expect_shape(p.shape())?;
        g.check_finite("adam gradient")?;
    }

    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let it = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut());
        for (((theta, &grad), m), v) in it {
            let grad = grad + cfg.weight_decay * *theta;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * grad;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * grad * grad;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *theta -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

//! AdamW and the warmup + cosine learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Linear warmup from 0 to `base_lr` over `warmup` steps, then cosine decay
/// reaching 0 at `total` steps.
pub fn lr_at(step: usize, base_lr: f64, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        return base_lr * step as f64 / warmup as f64;
    }
    if total <= warmup {
        return base_lr;
    }
    let progress = ((step - warmup) as f64 / (total - warmup) as f64).min(1.0);
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

impl AdamW {
    /// One update; `step` is 1-based for bias correction.
    pub fn step(
        &self,
        params: &mut [f64],
        grads: &[f64],
        state: &mut AdamState,
        step: usize,
        lr: f64,
    ) -> Result<()> {
        if params.len() != grads.len() || state.m.len() != params.len() {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: grads.len(),
            });
        }
        if step == 0 {
            return Err(Error::invalid("AdamW step is 1-based"));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        let bc1 = 1.0 - self.beta1.powi(step as i32);
        let bc2 = 1.0 - self.beta2.powi(step as i32);
        let decay = 1.0 - lr * self.weight_decay;
        for i in 0..params.len() {
            let g = grads[i];
            state.m[i] = self.beta1 * state.m[i] + (1.0 - self.beta1) * g;
            state.v[i] = self.beta2 * state.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = state.m[i] / bc1;
            let v_hat = state.v[i] / bc2;
            params[i] = params[i] * decay - lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

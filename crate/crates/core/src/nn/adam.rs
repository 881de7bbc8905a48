use serde::{Deserialize, Serialize};

use super::layer::LayerParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<LayerParams>,
    pub v: Vec<LayerParams>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[LayerParams]) -> Self {
        let zeros: Vec<_> = params.iter().map(LayerParams::zeros_like).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected ADAM update. Parameters are left untouched when any
/// gradient is non-finite.
pub fn adam_step(
    params: &mut [LayerParams],
    grads: &[LayerParams],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: grads.len(),
        });
    }
    for (layer, (g, p)) in grads.iter().zip(params.iter()).enumerate() {
        if g.n_params() != p.n_params() {
            return Err(Error::DimensionMismatch {
                expected: p.n_params(),
                actual: g.n_params(),
            });
        }
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { layer });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((w, &gi), mi), vi) in p
            .values_mut()
            .zip(g.values())
            .zip(m.values_mut())
            .zip(v.values_mut())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *w -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

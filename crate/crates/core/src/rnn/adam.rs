use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Nothing changes if `grads` has a
/// non-finite entry.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[f64],
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    let n = params.len();
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(Error::Dimension {
                expected: n,
                got: len,
            });
        }
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    state.t += 1;
    let bc1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(state.t as i32);
    for (((p, &g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
        *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    Ok(())
}

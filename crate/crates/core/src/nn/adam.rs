use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(params: &P, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params.tensors().into_iter().map(Tensor::zeros_like).collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. `batch` only labels errors.
pub fn adam_step<P: Parameters + ?Sized, G: Parameters + ?Sized>(
    params: &mut P,
    grads: &G,
    state: &mut AdamState,
    batch: usize,
) -> Result<()> {
    let grads = grads.tensors();
    if grads.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "{} gradient tensors for {} parameter tensors",
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training {
            batch,
            msg: "non-finite gradient".into(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        if p.len() != g.len() {
            return Err(Error::Shape("gradient/parameter length mismatch".into()));
        }
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
            v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
            let mhat = m.data[i] / c1;
            let vhat = v.data[i] / c2;
            p.data[i] -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

//! Adam with bias correction.

use super::ParamStore;
use crate::error::{Error, Result};
use crate::math;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }
}

/// One Adam update in place. Rejects non-finite gradient entries, naming the
/// offending parameter.
pub fn adam_step(store: &mut ParamStore, grads: &[f64], state: &mut AdamState) -> Result<()> {
    if grads.len() != store.len() {
        return Err(Error::ShapeMismatch {
            op: "adam_step",
            detail: alloc::format!("{} grads for {} params", grads.len(), store.len()),
        });
    }
    if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { what: store.name_at(bad).to_string() });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - math::pow(state.beta1, t as f64);
    let bc2 = 1.0 - math::pow(state.beta2, t as f64);
    let params = store.flat_mut();
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= state.lr * mhat / (math::sqrt(vhat) + state.eps);
    }
    Ok(())
}

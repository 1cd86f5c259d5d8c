//! Bias-corrected Adam with per-group learning rates and box projection.

use serde::{Deserialize, Serialize};

use super::DiffError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for one flat parameter block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Projection applied after every step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constraint {
    Free,
    /// Clamp each entry into `[lo, hi]`.
    Box {
        lo: f64,
        hi: f64,
    },
}

impl Constraint {
    pub const UNIT: Constraint = Constraint::Box { lo: 0.0, hi: 1.0 };

    pub fn project(&self, params: &mut [f64]) {
        if let Constraint::Box { lo, hi } = *self {
            for p in params {
                *p = p.clamp(lo, hi);
            }
        }
    }
}

/// One Adam update in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
) -> Result<(), DiffError> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(DiffError::ShapeMismatch {
            params: params.len(),
            grads: grads.len(),
            state: state.len(),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// A named parameter block with its own learning rate and constraint.
#[derive(Clone, Debug)]
pub struct ParamGroup {
    pub name: &'static str,
    pub state: AdamState,
    pub constraint: Constraint,
}

impl ParamGroup {
    pub fn new(name: &'static str, len: usize, lr: f64, constraint: Constraint) -> Self {
        Self {
            name,
            state: AdamState::new(len, lr),
            constraint,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), DiffError> {
        adam_step(params, grads, &mut self.state)?;
        self.constraint.project(params);
        Ok(())
    }
}

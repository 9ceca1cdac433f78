use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inr::{GradientSet, InrModel};

/// Linear warmup to `lr_max`, then cosine annealing to zero at `total_steps`.
pub fn lr_at(step: usize, total_steps: usize, warmup_steps: usize, lr_max: f64) -> f64 {
    if step < warmup_steps {
        return lr_max * step as f64 / warmup_steps as f64;
    }
    let span = total_steps.saturating_sub(warmup_steps).max(1) as f64;
    let progress = ((step - warmup_steps) as f64 / span).min(1.0);
    lr_max * 0.5 * (1.0 + (PI * progress).cos())
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
pub fn clip_grad_norm(mut grads: GradientSet, max_norm: f64) -> Result<GradientSet> {
    if !grads.is_finite() {
        return Err(Error::NonFiniteGradient("gradient set".into()));
    }
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    Ok(grads)
}

/// Adam moments for the trunk group and the separately scheduled regularizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub lambda_first: f64,
    pub lambda_second: f64,
}

impl OptimizerState {
    pub fn new(model: &InrModel, beta1: f64, beta2: f64, eps: f64) -> Self {
        let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        Self {
            step: 0,
            beta1,
            beta2,
            eps,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            lambda_first: 0.0,
            lambda_second: 0.0,
        }
    }
}

/// One bias-corrected Adam step. `lambda_raw` uses `lambda_lr`, everything else `lr`.
pub fn adam_update(state: &mut OptimizerState, model: &mut InrModel, grads: &GradientSet, lr: f64, lambda_lr: f64) -> Result<()> {
    let grad_tensors = grads.tensors();
    if grad_tensors.len() != state.first.len() {
        return Err(Error::ShapeMismatch("gradient set does not match optimizer state".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in model
        .tensors_mut()
        .into_iter()
        .zip(grad_tensors)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        if p.len() != g.len() || m.len() != p.len() {
            return Err(Error::ShapeMismatch("parameter and gradient sizes differ".into()));
        }
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
    }
    let g = grads.lambda_raw;
    state.lambda_first = b1 * state.lambda_first + (1.0 - b1) * g;
    state.lambda_second = b2 * state.lambda_second + (1.0 - b2) * g * g;
    model.lambda_raw -= lambda_lr * (state.lambda_first / c1) / ((state.lambda_second / c2).sqrt() + eps);
    Ok(())
}

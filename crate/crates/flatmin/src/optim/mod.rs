//! Optimizers and training loops: plain SGD steps, ADAM with bias
//! correction, mini-batch sampling, and the full / conservative training
//! drivers.

pub mod sampler;
pub mod train;

pub use sampler::{BatchSampler, SampleStrategy};
pub use train::{
    conservative_train, train, Checkpoint, EpochRecord, StopRule, TrainConfig, TrainTrace,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::ParamVector;

/// ADAM hyperparameters (community defaults).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { alpha: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First/second moment state for ADAM.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    hyper: AdamParams,
}

impl AdamState {
    pub fn new(n: usize, hyper: AdamParams) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, hyper }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected ADAM update in place.
    pub fn step(&mut self, x: &mut ParamVector, grad: &[f64]) -> Result<()> {
        check_grad(x, grad)?;
        self.t += 1;
        let AdamParams { alpha, beta1, beta2, epsilon } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let values = x.values_mut();
        for i in 0..grad.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            values[i] -= alpha * mhat / (vhat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// `x' = x - alpha * grad`.
pub fn sgd_step(x: &mut ParamVector, grad: &[f64], alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive, got {alpha}")));
    }
    check_grad(x, grad)?;
    for (xv, &g) in x.values_mut().iter_mut().zip(grad) {
        *xv -= alpha * g;
    }
    Ok(())
}

fn check_grad(x: &ParamVector, grad: &[f64]) -> Result<()> {
    if grad.len() != x.n() {
        return Err(Error::Shape(format!(
            "gradient has {} entries for {} parameters",
            grad.len(),
            x.n()
        )));
    }
    if !crate::numeric::all_finite(grad) {
        return Err(Error::NonFinite { context: "optimizer gradient".into() });
    }
    Ok(())
}

/// Which optimizer a training run uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd { alpha: f64 },
    Adam(AdamParams),
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam(AdamParams::default())
    }
}

pub(crate) enum OptimizerState {
    Sgd { alpha: f64 },
    Adam(AdamState),
}

impl OptimizerState {
    pub(crate) fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd { alpha } => OptimizerState::Sgd { alpha },
            OptimizerKind::Adam(p) => OptimizerState::Adam(AdamState::new(n, p)),
        }
    }

    pub(crate) fn step(&mut self, x: &mut ParamVector, grad: &[f64]) -> Result<()> {
        match self {
            OptimizerState::Sgd { alpha } => sgd_step(x, grad, *alpha),
            OptimizerState::Adam(state) => state.step(x, grad),
        }
    }
}

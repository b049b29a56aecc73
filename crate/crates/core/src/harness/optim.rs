//! Adaptive-moment optimizer and the step learning-rate schedule.
//!
//! This is the training optimizer (Kingma & Ba). It has nothing to do with the
//! dual attention module that shares its acronym in [`crate::attention`].

use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamOptimizer {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamOptimizer {
    /// Zero moments shaped like every parameter in `store`.
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|(_, p)| Tensor::zeros(p.value().shape())).collect();
        AdamOptimizer {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// Rebuilds a saved state; moment shapes must match `store`.
    pub fn from_parts(store: &ParamStore, step: u64, first: Vec<Tensor>, second: Vec<Tensor>) -> Result<Self> {
        let mut opt = AdamOptimizer::new(store);
        if first.len() != opt.first.len() || second.len() != opt.second.len() {
            return Err(Error::Checkpoint(format!(
                "optimizer has {}/{} moments for {} parameters",
                first.len(),
                second.len(),
                opt.first.len()
            )));
        }
        for ((m, v), (_, p)) in first.iter().zip(&second).zip(store.iter()) {
            if m.shape() != p.value().shape() || v.shape() != p.value().shape() {
                return Err(Error::Checkpoint(format!("moment shape mismatch for `{}`", p.name())));
            }
        }
        opt.step = step;
        opt.first = first;
        opt.second = second;
        Ok(opt)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// One bias-corrected update from the gradients held in `store`.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        if store.len() != self.first.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer tracks {} parameters, store has {}",
                self.first.len(),
                store.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = p.grad().clone();
            let value = p.value_mut().data_mut();
            for (((x, &g), m), v) in value
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / correct1;
                let v_hat = *v / correct2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// `initial * 0.5^floor(iteration / halve_every)`.
pub fn lr_at(iteration: u64, initial: f64, halve_every: u64) -> f64 {
    let halvings = iteration.checked_div(halve_every).unwrap_or(0);
    initial * 0.5f64.powi(halvings.min(i32::MAX as u64) as i32)
}

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moments for a list of parameter tensors.
///
/// Entries whose gradient is exactly zero are skipped: neither the parameter
/// nor its moments change. A step with an all-zero gradient is therefore the
/// identity on the parameters whatever the accumulated state.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    config: AdamConfig,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
    step_count: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            first_moment: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step_count: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<T>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<T>] {
        &self.second_moment
    }

    /// One bias-corrected update over every tensor.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        ensure_len("adam tensor count", self.first_moment.len(), params.len())?;
        ensure_len("adam gradient count", params.len(), grads.len())?;
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            ensure_len("adam parameter", m.len(), p.len())?;
            ensure_len("adam gradient", m.len(), g.len())?;
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c = self.config;
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let bc1 = T::from_f64(1.0 - c.beta1.powi(t));
        let bc2 = T::from_f64(1.0 - c.beta2.powi(t));
        let lr = T::from_f64(c.learning_rate);
        let eps = T::from_f64(c.epsilon);
        let one = T::one();
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for i in 0..p.len() {
                let gi = g[i];
                if gi == T::zero() {
                    continue;
                }
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Single-tensor convenience wrapper around [`AdamState::step`].
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>) -> Result<()> {
    if state.first_moment.len() != 1 {
        return Err(Error::config("adam_step expects a single-tensor state"));
    }
    state.step(&mut [params], &[grads])
}

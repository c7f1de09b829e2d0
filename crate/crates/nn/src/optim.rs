//! AdamW, cosine learning-rate schedule and global-norm gradient clipping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::tensor::{Scalar, Tensor4};

/// Learning rate at step `t` of `total`: `lr_min + (lr_max - lr_min) (1 + cos(pi t / total)) / 2`.
pub fn cosine_lr(t: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return lr_max;
    }
    let frac = t.min(total) as f64 / total as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * frac).cos())
}

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [Tensor4<T>], max_norm: f64) -> f64 {
    let norm = grads.iter().map(Tensor4::sum_sq).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = T::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            for v in g.data.iter_mut() {
                *v = *v * scale;
            }
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    pub step: u64,
    m: Vec<Tensor4<T>>,
    v: Vec<Tensor4<T>>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(config: AdamWConfig, params: &[Tensor4<T>]) -> Self {
        Self {
            config,
            step: 0,
            m: params.iter().map(|p| Tensor4::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor4::zeros(p.shape())).collect(),
        }
    }

    /// One decoupled-weight-decay Adam update with learning rate `lr`.
    pub fn step(&mut self, params: &mut [Tensor4<T>], grads: &[Tensor4<T>], lr: f64) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::Shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() {
                return Err(NnError::Shape(format!(
                    "gradient {:?} does not match parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            for i in 0..p.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + one_b1 * gi;
                v.data[i] = b2 * v.data[i] + one_b2 * gi * gi;
                let m_hat = m.data[i].to_f64() / bc1;
                let v_hat = v.data[i].to_f64() / bc2;
                let theta = p.data[i].to_f64();
                let updated = theta - lr * (m_hat / (v_hat.sqrt() + c.eps) + c.weight_decay * theta);
                p.data[i] = T::from_f64(updated);
            }
        }
        Ok(())
    }
}

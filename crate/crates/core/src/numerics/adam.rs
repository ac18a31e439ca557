use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::param::ParamSet;
use crate::numerics::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip applied before each update.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First/second moment estimates for every parameter of one `ParamSet`.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new<P: ParamSet + ?Sized>(params: &P, config: AdamConfig) -> Self {
        let shapes: Vec<(usize, usize)> = params.params().iter().map(|p| p.value.shape()).collect();
        Self {
            config,
            t: 0,
            m: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
        }
    }

    /// One bias-corrected Adam update from the accumulated gradients, then
    /// zeroes them. Returns the pre-clip gradient norm.
    pub fn step<P: ParamSet + ?Sized>(&mut self, params: &mut P) -> Result<f64> {
        let mut ps = params.params_mut();
        if ps.len() != self.m.len() {
            return Err(Error::shape("adam state", self.m.len(), ps.len()));
        }
        for (p, m) in ps.iter().zip(&self.m) {
            p.check()?;
            if p.value.shape() != m.shape() {
                return Err(Error::shape("adam moment", m.to_string(), p.value.to_string()));
            }
        }
        let norm = ps.iter().map(|p| p.grad.sum_squares()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite {
                context: "gradient norm".into(),
                value: norm,
            });
        }
        let clip = match self.config.clip_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };

        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps, .. } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, m), v) in ps.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let vals = p.value.as_mut_slice();
            let grads = p.grad.as_mut_slice();
            for (((w, g), mi), vi) in vals
                .iter_mut()
                .zip(grads.iter_mut())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                let g_c = *g * clip;
                *mi = beta1 * *mi + (1.0 - beta1) * g_c;
                *vi = beta2 * *vi + (1.0 - beta2) * g_c * g_c;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
                *g = 0.0;
            }
        }
        Ok(norm)
    }
}

use serde::{Deserialize, Serialize};

use super::Params;
use crate::scene::{GaussianAttributes, PARAMS_PER_GAUSSIAN};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Per-parameter moments stored in `f32`, updated in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Completed batches.
    pub t: u64,
    pub m: Vec<[f32; PARAMS_PER_GAUSSIAN]>,
    pub v: Vec<[f32; PARAMS_PER_GAUSSIAN]>,
}

impl AdamState {
    pub fn new(n: usize, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            t: 0,
            m: vec![[0.0; PARAMS_PER_GAUSSIAN]; n],
            v: vec![[0.0; PARAMS_PER_GAUSSIAN]; n],
        })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One Adam step for Gaussian `g` at step number `step` (1-based).
    pub fn update(&mut self, g: usize, param: &mut GaussianAttributes, grad: &Params, step: u64) {
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(step as i32);
        let bc2 = 1.0 - c.beta2.powi(step as i32);
        let mut p = param.to_params();
        let (m, v) = (&mut self.m[g], &mut self.v[g]);
        for k in 0..PARAMS_PER_GAUSSIAN {
            let mk = c.beta1 * m[k] as f64 + (1.0 - c.beta1) * grad[k];
            let vk = c.beta2 * v[k] as f64 + (1.0 - c.beta2) * grad[k] * grad[k];
            let step_k = c.lr * (mk / bc1) / ((vk / bc2).sqrt() + c.eps);
            p[k] = (p[k] as f64 - step_k) as f32;
            m[k] = mk as f32;
            v[k] = vk as f32;
        }
        *param = GaussianAttributes::from_params(&p);
    }

    /// Zero-gradient step: moments decay and the parameter keeps moving
    /// along its momentum.
    pub fn decay(&mut self, g: usize, param: &mut GaussianAttributes, step: u64) {
        self.update(g, param, &[0.0; PARAMS_PER_GAUSSIAN], step);
    }
}

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::lpdo::Lpdo;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers for complex Adam: the first moment tracks the complex
/// gradient, the second tracks `|g|^2`.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Vec<C64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(lpdo: &Lpdo) -> Self {
        Self {
            m: lpdo
                .sites()
                .iter()
                .map(|s| vec![C64::new(0.0, 0.0); s.len()])
                .collect(),
            v: lpdo.sites().iter().map(|s| vec![0.0; s.len()]).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update along `-grads`.
    pub fn step(&mut self, lpdo: &mut Lpdo, grads: &[Vec<C64>], cfg: &AdamConfig) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (j, g) in grads.iter().enumerate() {
            let params = lpdo.site_data_mut(j);
            for (((p, m), v), gi) in params
                .iter_mut()
                .zip(&mut self.m[j])
                .zip(&mut self.v[j])
                .zip(g)
            {
                *m = *m * cfg.beta1 + gi * (1.0 - cfg.beta1);
                *v = *v * cfg.beta2 + gi.norm_sqr() * (1.0 - cfg.beta2);
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= m_hat * (cfg.alpha / (v_hat.sqrt() + cfg.eps));
            }
        }
    }
}

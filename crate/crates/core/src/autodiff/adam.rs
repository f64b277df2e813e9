use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::{ParamGrads, ParamSet};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam optimizer state: first and second moment estimates per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect::<Vec<_>>();
        Adam { config, step: 0, first: zeros(), second: zeros() }
    }

    /// Rebuilds optimizer state from its parts (e.g. after loading a checkpoint).
    pub fn from_parts(config: AdamConfig, step: u64, first: Vec<Vec<T>>, second: Vec<Vec<T>>) -> Result<Self> {
        if first.len() != second.len() || first.iter().zip(&second).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::shape("adam", "moment buffers differ in layout"));
        }
        Ok(Adam { config, step, first, second })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.second
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamGrads<T>) -> Result<()> {
        let layout_ok = params.len() == self.first.len()
            && grads.grads.len() == self.first.len()
            && params
                .iter()
                .zip(&self.first)
                .zip(&grads.grads)
                .all(|(((_, p), m), g)| p.len() == m.len() && g.len() == m.len());
        if !layout_ok {
            return Err(Error::shape("adam", format!("optimizer state does not match {} parameters", params.len())));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let lr_t = c.learning_rate * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t));
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        let lr_t = T::from_f64(lr_t);
        // epsilon enters in the bias-corrected denominator sqrt(v_hat) + eps
        let eps_t = T::from_f64(c.epsilon * (1.0 - c.beta2.powi(t)).sqrt());
        for (i, grad) in grads.grads.iter().enumerate() {
            let p = params.get_mut(super::ParamId(i)).data_mut();
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + one_b1 * g;
                v[j] = b2 * v[j] + one_b2 * g * g;
                p[j] -= lr_t * m[j] / (v[j].sqrt() + eps_t);
            }
        }
        Ok(())
    }
}

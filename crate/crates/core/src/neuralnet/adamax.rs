//! AdaMax: Adam with the second moment replaced by an exponentially
//! weighted infinity norm.

use super::network::{Gradients, QNetwork};
use super::tensor::Real;
use crate::error::{Error, Result};

const MIN_NORM: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdaMax<T> {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    t: u64,
    m: Vec<Vec<T>>,
    u: Vec<Vec<T>>,
}

impl<T: Real> AdaMax<T> {
    pub fn new(step_size: f64, beta1: f64, beta2: f64) -> Self {
        AdaMax {
            step_size,
            beta1,
            beta2,
            t: 0,
            m: Vec::new(),
            u: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to `params` in place. Moment buffers are sized
    /// lazily on the first call and must match afterwards.
    pub fn step(&mut self, params: &mut [&mut Vec<T>], grads: &Gradients<T>) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::arg("parameter and gradient shapes differ"));
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.u = self.m.clone();
        } else if self.m.len() != grads.len() || self.m.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
            return Err(Error::arg("optimizer state does not match parameters"));
        }
        self.t += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one_minus_b1 = T::from_f64(1.0 - self.beta1);
        let lr = T::from_f64(self.step_size / (1.0 - self.beta1.powi(self.t.min(i32::MAX as u64) as i32)));
        let floor = T::from_f64(MIN_NORM);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, u, g) = (&mut self.m[k], &mut self.u[k], &grads[k]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + one_minus_b1 * g[i];
                u[i] = (b2 * u[i]).max(g[i].abs());
                p[i] = p[i] - lr * m[i] / u[i].max(floor);
            }
        }
        Ok(())
    }

    pub fn step_network(&mut self, net: &mut QNetwork<T>, grads: &Gradients<T>) -> Result<()> {
        let mut params = net.params_mut();
        self.step(&mut params, grads)
    }
}

impl<T: Real> Default for AdaMax<T> {
    fn default() -> Self {
        Self::new(0.002, 0.9, 0.999)
    }
}

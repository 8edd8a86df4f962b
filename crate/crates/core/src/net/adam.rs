//! Adam optimizer with bias correction.

use super::layers::Real;
use super::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    /// Moment accumulators shaped like the network's parameter list.
    pub fn new(net: &Network<T>, lr: f64) -> AdamState<T> {
        let shapes: Vec<usize> = net.param_refs().iter().map(|p| p.len()).collect();
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// One bias-corrected update; fails with a training error on non-finite
    /// gradients so callers can stop with diagnostics instead of corrupting
    /// the weights.
    pub fn step(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        let gslices = grads.slices();
        for (i, g) in gslices.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite gradient in parameter block {i} at adam step {}",
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let inv_bc1 = T::from_f64(1.0 / (1.0 - self.beta1.powi(self.step as i32)));
        let inv_bc2 = T::from_f64(1.0 / (1.0 - self.beta2.powi(self.step as i32)));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(self.eps);

        let mut params = net.param_muts();
        debug_assert_eq!(params.len(), gslices.len());
        for ((p, g), (m, v)) in
            params.iter_mut().zip(&gslices).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = b1 * m[k] + (one - b1) * gk;
                v[k] = b2 * v[k] + (one - b2) * gk * gk;
                let m_hat = m[k] * inv_bc1;
                let v_hat = v[k] * inv_bc2;
                p[k] = p[k] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

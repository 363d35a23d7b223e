//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_shape, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Moment accumulators for an ordered list of parameter blocks.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all blocks. The step counter advances before the bias
    /// correction is computed, so the first call uses `t = 1`.
    ///
    /// Blocks must arrive in the same order and with the same sizes on every call.
    pub fn step<'a, I>(&mut self, blocks: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a mut [T], &'a [T])>,
    {
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let one = T::one();
        let corr1 = one - T::lit(c.beta1.powi(t));
        let corr2 = one - T::lit(c.beta2.powi(t));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.epsilon));
        for (i, (param, grad)) in blocks.into_iter().enumerate() {
            if param.len() != grad.len() {
                return Err(invalid_shape(format!(
                    "adam block {i}: {} parameters but {} gradients",
                    param.len(),
                    grad.len()
                )));
            }
            if i == self.first.len() {
                self.first.push(vec![T::zero(); param.len()]);
                self.second.push(vec![T::zero(); param.len()]);
            }
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            if m.len() != param.len() {
                return Err(invalid_shape(format!(
                    "adam block {i} changed size from {} to {}",
                    m.len(),
                    param.len()
                )));
            }
            for (((p, &g), m), v) in param.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut adam = Adam::<f64>::new(AdamConfig::default());
        let mut p = vec![1.0, -2.0];
        adam.step([(&mut p[..], &[0.0, 0.0][..])]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [0.3, -7.0, 1e-3] {
            let mut adam = Adam::<f64>::new(AdamConfig::default());
            let mut p = vec![0.0];
            adam.step([(&mut p[..], &[g][..])]).unwrap();
            // m̂ = g, v̂ = g²: update = −lr·g/(|g| + ε).
            let expected = -0.001 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-15);
            assert!((p[0] + 0.001 * g.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut adam = Adam::<f64>::new(AdamConfig::with_lr(0.01));
            let mut p = vec![0.5, -0.25, 2.0];
            for k in 0..50 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + (k as f64).sin()).collect();
                adam.step([(&mut p[..], &g[..])]).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn size_change_rejected() {
        let mut adam = Adam::<f32>::new(AdamConfig::default());
        let mut p = vec![0.0f32; 2];
        adam.step([(&mut p[..], &[1.0f32, 1.0][..])]).unwrap();
        let mut q = vec![0.0f32; 3];
        assert!(adam.step([(&mut q[..], &[1.0f32; 3][..])]).is_err());
    }
}

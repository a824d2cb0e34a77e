//! ADAM with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::nn::network::{GradientSet, MlpNetwork};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators shaped like the parameters, plus the
/// step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    config: AdamConfig,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed state for tensors of the given lengths.
    pub fn with_shapes<I: IntoIterator<Item = usize>>(shapes: I, config: AdamConfig) -> Self {
        let first: Vec<Vec<T>> = shapes.into_iter().map(|n| vec![T::zero(); n]).collect();
        Self {
            config,
            second: first.clone(),
            first,
            step: 0,
        }
    }

    pub fn for_network(net: &MlpNetwork<T>, config: AdamConfig) -> Self {
        Self::with_shapes(net.params().iter().map(|p| p.len()), config)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.config
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.second
    }

    /// One update over raw parameter tensors.
    pub fn update(&mut self, params: Vec<&mut [T]>, grads: &GradientSet<T>, lr: T) -> Result<()> {
        if params.len() != self.first.len() || grads.tensors.len() != self.first.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first.len(),
                got: grads.tensors.len(),
            });
        }
        for (p, g) in params.iter().zip(&grads.tensors) {
            if p.len() != g.len() {
                return Err(Error::DimensionMismatch {
                    expected: p.len(),
                    got: g.len(),
                });
            }
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient passed to ADAM".into()));
        }
        self.step += 1;
        let b1 = T::lit(self.config.beta1);
        let b2 = T::lit(self.config.beta2);
        let eps = T::lit(self.config.eps);
        let t = self.step as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(&grads.tensors)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Applies one ADAM step to every trainable tensor of `net`.
pub fn adam_step<T: Scalar>(
    net: &mut MlpNetwork<T>,
    grads: &GradientSet<T>,
    state: &mut AdamState<T>,
    lr: T,
) -> Result<()> {
    state.update(net.params_mut(), grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_grad(g: f64) -> GradientSet<f64> {
        GradientSet {
            tensors: vec![vec![g]],
        }
    }

    #[test]
    fn moments_start_at_zero() {
        let s = AdamState::<f64>::with_shapes([3, 2], AdamConfig::default());
        assert_eq!(s.step_count(), 0);
        assert!(s.first_moments().iter().flatten().all(|&m| m == 0.0));
        assert!(s.second_moments().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_gradient_first_step_is_noop() {
        let mut s = AdamState::<f64>::with_shapes([1], AdamConfig::default());
        let mut w = [0.7];
        s.update(vec![&mut w[..]], &scalar_grad(0.0), 0.1).unwrap();
        assert_eq!(w[0], 0.7);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::<f64>::with_shapes([1], AdamConfig::default());
        let mut w = [0.0];
        s.update(vec![&mut w[..]], &scalar_grad(1.0), 0.001).unwrap();
        // m_hat = v_hat = 1 → Δ = lr / (1 + ε)
        assert!((w[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn minimizes_square() {
        // Independent scalar recurrence of the ADAM update on f(w) = w².
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let (mut w_ref, mut m, mut v) = (1.0f64, 0.0, 0.0);
        for t in 1..=100 {
            let g = 2.0 * w_ref;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w_ref -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        assert!(w_ref.abs() < 0.1, "reference recurrence ends at {w_ref}");

        let mut s = AdamState::<f64>::with_shapes([1], AdamConfig::default());
        let mut w = [1.0];
        for _ in 0..100 {
            let g = scalar_grad(2.0 * w[0]);
            s.update(vec![&mut w[..]], &g, lr).unwrap();
        }
        assert!(w[0].abs() < 0.1);
        assert!((w[0] - w_ref).abs() < 1e-12);
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut s = AdamState::<f64>::with_shapes([1], AdamConfig::default());
        let mut w = [0.0];
        let err = s.update(vec![&mut w[..]], &scalar_grad(f64::NAN), 0.1);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(s.step_count(), 0);
    }
}

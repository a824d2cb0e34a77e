//! Multiplicative-noise dropout layers.
//!
//! All three kinds multiply each activation by an independent noise value
//! with mean 1 during training, so the deterministic pass is the identity:
//!
//! - `Standard`: inverted Bernoulli dropout, noise ∈ {0, 1/(1-p)}.
//! - `Gaussian`: noise ~ N(1, p/(1-p)).
//! - `Variational`: noise ~ N(1, α_j) with a learnable per-unit `log α_j`,
//!   regularized by an approximate KL term.
//!
//! Noise is generated from "raw" draws (keep masks or standard normals) so a
//! recorded forward pass can be replayed against perturbed parameters.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Lower clamp on the variational noise variance.
pub const ALPHA_MIN: f64 = 1e-8;

/// Cubic approximation constants of the negative KL divergence for
/// log-uniform-prior variational dropout.
pub const KL_C1: f64 = 1.16145124;
pub const KL_C2: f64 = -1.50204118;
pub const KL_C3: f64 = 0.58629921;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropoutKind {
    Standard,
    Gaussian,
    Variational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutLayer<T> {
    dim: usize,
    kind: DropoutKind,
    rate: T,
    log_alpha: Vec<T>,
}

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "dropout rate must lie in [0, 1), got {p}"
        )));
    }
    Ok(())
}

impl<T: Scalar> DropoutLayer<T> {
    /// Builds a layer of `kind`. For `Variational`, `rate` only sets the
    /// initial variance `α = p / (1 - p)` of every unit.
    pub fn new(kind: DropoutKind, dim: usize, rate: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dropout dim must be >= 1".into()));
        }
        check_rate(rate)?;
        let log_alpha = match kind {
            DropoutKind::Variational => {
                let alpha = (rate / (1.0 - rate)).max(ALPHA_MIN);
                vec![T::lit(alpha.ln()); dim]
            }
            _ => Vec::new(),
        };
        Ok(Self {
            dim,
            kind,
            rate: T::lit(rate),
            log_alpha,
        })
    }

    pub fn standard(dim: usize, p: f64) -> Result<Self> {
        Self::new(DropoutKind::Standard, dim, p)
    }

    pub fn gaussian(dim: usize, p: f64) -> Result<Self> {
        Self::new(DropoutKind::Gaussian, dim, p)
    }

    pub fn variational(dim: usize, initial_p: f64) -> Result<Self> {
        Self::new(DropoutKind::Variational, dim, initial_p)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn kind(&self) -> DropoutKind {
        self.kind
    }

    #[inline]
    pub fn rate(&self) -> T {
        self.rate
    }

    /// Learnable per-unit `log α` (empty unless variational).
    pub fn log_alpha(&self) -> &[T] {
        &self.log_alpha
    }

    pub(crate) fn log_alpha_mut(&mut self) -> &mut [T] {
        &mut self.log_alpha
    }

    /// Clamped variance `α_j ∈ [ALPHA_MIN, 1]` used by the variational noise.
    #[inline]
    pub fn alpha(&self, unit: usize) -> T {
        self.log_alpha[unit]
            .exp()
            .max(T::lit(ALPHA_MIN))
            .min(T::one())
    }

    #[inline]
    fn alpha_unclamped(&self, unit: usize) -> bool {
        let a = self.log_alpha[unit].exp();
        a > T::lit(ALPHA_MIN) && a < T::one()
    }

    /// Draws the raw randomness for `rows x dim` activations: keep masks
    /// (1 or 0) for standard dropout, standard normals otherwise.
    pub(crate) fn sample_raw<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Vec<T> {
        let n = rows * self.dim;
        match self.kind {
            DropoutKind::Standard => {
                let p = self.rate.as_f64();
                (0..n)
                    .map(|_| {
                        if rng.random::<f64>() < p {
                            T::zero()
                        } else {
                            T::one()
                        }
                    })
                    .collect()
            }
            DropoutKind::Gaussian | DropoutKind::Variational => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    T::lit(z)
                })
                .collect(),
        }
    }

    /// Maps raw draws to multiplicative noise under the current parameters.
    pub(crate) fn noise_from_raw(&self, raw: &[T]) -> Vec<T> {
        match self.kind {
            DropoutKind::Standard => {
                let scale = T::one() / (T::one() - self.rate);
                raw.iter().map(|&keep| keep * scale).collect()
            }
            DropoutKind::Gaussian => {
                let sd = (self.rate / (T::one() - self.rate)).sqrt();
                raw.iter().map(|&z| T::one() + sd * z).collect()
            }
            DropoutKind::Variational => {
                let sd: Vec<T> = (0..self.dim).map(|j| self.alpha(j).sqrt()).collect();
                raw.iter()
                    .enumerate()
                    .map(|(i, &z)| T::one() + sd[i % self.dim] * z)
                    .collect()
            }
        }
    }

    /// Samples a `rows x dim` multiplicative noise matrix.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Matrix<T> {
        let raw = self.sample_raw(rows, rng);
        Matrix::from_vec(rows, self.dim, self.noise_from_raw(&raw))
            .expect("noise shape matches")
    }

    /// KL regularizer of a variational layer, summed over units:
    /// `-Σ_j (½ log α_j + c1 α_j + c2 α_j² + c3 α_j³)`.
    pub fn kl_penalty(&self) -> Result<T> {
        if self.kind != DropoutKind::Variational {
            return Err(Error::Misuse(format!(
                "kl_penalty on a {:?} dropout layer",
                self.kind
            )));
        }
        let (c1, c2, c3) = (T::lit(KL_C1), T::lit(KL_C2), T::lit(KL_C3));
        let half = T::lit(0.5);
        Ok((0..self.dim)
            .map(|j| {
                let a = self.alpha(j);
                -(half * a.ln() + c1 * a + c2 * a * a + c3 * a * a * a)
            })
            .sum())
    }

    /// Accumulates `weight * ∂kl_penalty/∂log α` into `grad`.
    pub(crate) fn add_kl_grad(&self, weight: T, grad: &mut [T]) {
        let (c1, c2, c3) = (T::lit(KL_C1), T::lit(KL_C2), T::lit(KL_C3));
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        for (j, g) in grad.iter_mut().enumerate() {
            if !self.alpha_unclamped(j) {
                continue;
            }
            let a = self.alpha(j);
            // d/dlogα = α · d/dα
            *g -= weight * (half + c1 * a + two * c2 * a * a + three * c3 * a * a * a);
        }
    }

    /// Backward through `y = x ⊙ noise`. Returns `dx`; accumulates
    /// `∂L/∂log α` for variational layers.
    pub(crate) fn backward(
        &self,
        x: &Matrix<T>,
        raw: &[T],
        noise: &[T],
        grad_out: &Matrix<T>,
        dlog_alpha: Option<&mut [T]>,
    ) -> Matrix<T> {
        let mut dx = grad_out.clone();
        if noise.is_empty() {
            return dx;
        }
        for (g, &n) in dx.as_mut_slice().iter_mut().zip(noise) {
            *g *= n;
        }
        if let (DropoutKind::Variational, Some(dla)) = (self.kind, dlog_alpha) {
            let half = T::lit(0.5);
            for j in 0..self.dim {
                if !self.alpha_unclamped(j) {
                    continue;
                }
                let dsd = self.alpha(j).sqrt() * half;
                let mut acc = T::zero();
                for r in 0..x.rows() {
                    let i = r * self.dim + j;
                    acc += grad_out.as_slice()[i] * x.as_slice()[i] * raw[i];
                }
                dla[j] += acc * dsd;
            }
        }
        dx
    }
}

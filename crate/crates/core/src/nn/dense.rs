//! Fully connected layer `y = activation(W x + b)`.
//!
//! Weights are row-major `(out_dim, in_dim)`. Batches are row-major
//! `(batch, dim)`, so the batched forward pass is `Z = X Wᵀ + 1 bᵀ`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Identity => z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<T>,
    biases: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weights: Vec<T>,
        biases: Vec<T>,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig("dense layer dims must be >= 1".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch {
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if biases.len() != out_dim {
            return Err(Error::DimensionMismatch {
                expected: out_dim,
                got: biases.len(),
            });
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    /// Uniform init with zero biases: He bound `sqrt(6 / in_dim)` for ReLU
    /// layers, LeCun bound `sqrt(3 / in_dim)` for linear output layers.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let gain = match activation {
            Activation::Relu => 6.0,
            Activation::Identity => 3.0,
        };
        let bound = (gain / in_dim.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound)
            .map_err(|e| Error::InvalidConfig(format!("init bound: {e}")))?;
        let weights = (0..in_dim * out_dim)
            .map(|_| T::lit(dist.sample(rng)))
            .collect();
        Self::from_parts(in_dim, out_dim, activation, weights, vec![T::zero(); out_dim])
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (&mut self.weights, &mut self.biases)
    }

    /// Returns `(pre_activation, post_activation)`.
    pub(crate) fn forward(&self, x: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
        debug_assert_eq!(x.cols(), self.in_dim);
        let batch = x.rows();
        let mut z = Matrix::zeros(batch, self.out_dim);
        for r in 0..batch {
            z.row_mut(r).copy_from_slice(&self.biases);
        }
        // Z += X · Wᵀ ; Wᵀ viewed through strides (1, in_dim).
        T::gemm(
            batch,
            self.in_dim,
            self.out_dim,
            T::one(),
            x.as_slice(),
            (self.in_dim, 1),
            &self.weights,
            (1, self.in_dim),
            T::one(),
            z.as_mut_slice(),
            (self.out_dim, 1),
        );
        let post = match self.activation {
            Activation::Identity => z.clone(),
            act => {
                let mut post = z.clone();
                post.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = act.apply(*v));
                post
            }
        };
        (z, post)
    }

    /// Accumulates `dW` and `db` into the given buffers and returns `dX`
    /// when `need_input_grad` is set.
    pub(crate) fn backward(
        &self,
        x: &Matrix<T>,
        pre: &Matrix<T>,
        grad_out: &Matrix<T>,
        dw: &mut [T],
        db: &mut [T],
        need_input_grad: bool,
    ) -> Option<Matrix<T>> {
        let batch = x.rows();
        let dz = match self.activation {
            Activation::Identity => grad_out.clone(),
            Activation::Relu => {
                let mut dz = grad_out.clone();
                for (g, &z) in dz.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    if z <= T::zero() {
                        *g = T::zero();
                    }
                }
                dz
            }
        };
        // dW (out x in) += dZᵀ · X
        T::gemm(
            self.out_dim,
            batch,
            self.in_dim,
            T::one(),
            dz.as_slice(),
            (1, self.out_dim),
            x.as_slice(),
            (self.in_dim, 1),
            T::one(),
            dw,
            (self.in_dim, 1),
        );
        for r in 0..batch {
            for (b, &g) in db.iter_mut().zip(dz.row(r)) {
                *b += g;
            }
        }
        if !need_input_grad {
            return None;
        }
        // dX (batch x in) = dZ · W
        let mut dx = Matrix::zeros(batch, self.in_dim);
        T::gemm(
            batch,
            self.out_dim,
            self.in_dim,
            T::one(),
            dz.as_slice(),
            (self.out_dim, 1),
            &self.weights,
            (self.in_dim, 1),
            T::zero(),
            dx.as_mut_slice(),
            (self.in_dim, 1),
        );
        Some(dx)
    }
}

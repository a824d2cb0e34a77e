use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::dense::{Activation, DenseLayer};
use crate::nn::dropout::{DropoutKind, DropoutLayer};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Fresh dropout noise per call.
    Train,
    /// No noise; dropout layers pass activations through unchanged.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Dense(DenseLayer<T>),
    Dropout(DropoutLayer<T>),
}

impl<T: Scalar> Layer<T> {
    fn in_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.in_dim(),
            Layer::Dropout(d) => d.dim(),
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.out_dim(),
            Layer::Dropout(d) => d.dim(),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Layer::Dense(_) => 2,
            Layer::Dropout(d) if d.kind() == DropoutKind::Variational => 1,
            Layer::Dropout(_) => 0,
        }
    }
}

/// Per-layer record of one forward pass.
#[derive(Debug, Clone)]
pub enum TapeEntry<T> {
    Dense {
        input: Matrix<T>,
        pre: Matrix<T>,
    },
    /// `raw` and `noise` are empty for a deterministic pass.
    Dropout {
        input: Matrix<T>,
        raw: Vec<T>,
        noise: Vec<T>,
    },
}

/// Everything `backward` needs from a forward pass, including the sampled
/// dropout randomness.
#[derive(Debug, Clone)]
pub struct ForwardTape<T> {
    version: u64,
    mode: Mode,
    batch: usize,
    entries: Vec<TapeEntry<T>>,
}

impl<T> ForwardTape<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn entries(&self) -> &[TapeEntry<T>] {
        &self.entries
    }
}

/// Gradients for every trainable tensor, in [`MlpNetwork::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_zero())
    }

    pub fn global_norm(&self) -> T {
        self.tensors
            .iter()
            .flatten()
            .map(|&g| g * g)
            .sum::<T>()
            .sqrt()
    }

    /// Rescales to `max_norm` when the global norm exceeds it. Returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: T) -> T {
        let norm = self.global_norm();
        if norm > max_norm && norm > T::zero() {
            let scale = max_norm / norm;
            self.tensors
                .iter_mut()
                .flatten()
                .for_each(|g| *g *= scale);
        }
        norm
    }
}

/// Dense feed-forward network with interleaved dropout layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork<T> {
    input_dim: usize,
    layers: Vec<Layer<T>>,
    version: u64,
}

impl<T: Scalar> MlpNetwork<T> {
    pub fn from_layers(input_dim: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        let mut dim = input_dim;
        for layer in &layers {
            if layer.in_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: layer.in_dim(),
                });
            }
            dim = layer.out_dim();
        }
        Ok(Self {
            input_dim,
            layers,
            version: 0,
        })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Layer::out_dim)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Parameter version, bumped on every mutable parameter access.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn dropout_layers(&self) -> impl Iterator<Item = &DropoutLayer<T>> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Dropout(d) => Some(d),
            Layer::Dense(_) => None,
        })
    }

    pub fn has_variational(&self) -> bool {
        self.dropout_layers()
            .any(|d| d.kind() == DropoutKind::Variational)
    }

    /// Trainable tensors: dense weights then biases per dense layer, and
    /// `log α` per variational layer, in layer order.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(d.weights());
                    out.push(d.biases());
                }
                Layer::Dropout(d) if d.kind() == DropoutKind::Variational => {
                    out.push(d.log_alpha());
                }
                Layer::Dropout(_) => {}
            }
        }
        out
    }

    /// Mutable view of [`params`](Self::params). Invalidates existing tapes.
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.version += 1;
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    let (w, b) = d.params_mut();
                    out.push(w);
                    out.push(b);
                }
                Layer::Dropout(d) if d.kind() == DropoutKind::Variational => {
                    out.push(d.log_alpha_mut());
                }
                Layer::Dropout(_) => {}
            }
        }
        out
    }

    pub fn zero_grads(&self) -> GradientSet<T> {
        GradientSet {
            tensors: self
                .params()
                .iter()
                .map(|p| vec![T::zero(); p.len()])
                .collect(),
        }
    }

    pub fn parameters_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Copies every parameter from `other` (`θ⁻ := θ`).
    pub fn copy_params_from(&mut self, other: &MlpNetwork<T>) -> Result<()> {
        if !self.same_architecture(other) {
            return Err(Error::InvalidConfig(
                "cannot copy parameters between different architectures".into(),
            ));
        }
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    pub fn same_architecture(&self, other: &MlpNetwork<T>) -> bool {
        self.input_dim == other.input_dim
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| match (a, b) {
                (Layer::Dense(a), Layer::Dense(b)) => {
                    a.in_dim() == b.in_dim()
                        && a.out_dim() == b.out_dim()
                        && a.activation() == b.activation()
                }
                (Layer::Dropout(a), Layer::Dropout(b)) => {
                    a.dim() == b.dim() && a.kind() == b.kind()
                }
                _ => false,
            })
    }

    fn check_batch(&self, batch: &Matrix<T>) -> Result<()> {
        if batch.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: batch.cols(),
            });
        }
        if batch.rows() == 0 {
            return Err(Error::InvalidConfig("batch must contain at least one row".into()));
        }
        if !batch.is_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Forward pass recording a tape. `Train` samples fresh dropout noise
    /// from `rng`; `Deterministic` never touches `rng`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        batch: &Matrix<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Matrix<T>, ForwardTape<T>)> {
        self.check_batch(batch)?;
        let rows = batch.rows();
        self.run(batch, mode, |_, layer| match (mode, layer) {
            (Mode::Train, Layer::Dropout(d)) => Some(d.sample_raw(rows, rng)),
            _ => None,
        })
    }

    /// Re-runs a recorded pass with the tape's raw dropout draws, under the
    /// network's current parameters.
    pub fn forward_replay(
        &self,
        batch: &Matrix<T>,
        tape: &ForwardTape<T>,
    ) -> Result<(Matrix<T>, ForwardTape<T>)> {
        self.check_batch(batch)?;
        if tape.entries.len() != self.layers.len() || tape.batch != batch.rows() {
            return Err(Error::InvalidConfig("tape does not match network/batch".into()));
        }
        self.run(batch, tape.mode, |idx, _| match &tape.entries[idx] {
            TapeEntry::Dropout { raw, .. } if !raw.is_empty() => Some(raw.clone()),
            _ => None,
        })
    }

    fn run<F>(&self, batch: &Matrix<T>, mode: Mode, mut raw_for: F) -> Result<(Matrix<T>, ForwardTape<T>)>
    where
        F: FnMut(usize, &Layer<T>) -> Option<Vec<T>>,
    {
        let mut x = batch.clone();
        let mut entries = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense(d) => {
                    let (pre, post) = d.forward(&x);
                    entries.push(TapeEntry::Dense { input: x, pre });
                    x = post;
                }
                Layer::Dropout(d) => match raw_for(idx, layer) {
                    Some(raw) => {
                        let noise = d.noise_from_raw(&raw);
                        let mut y = x.clone();
                        for (v, &n) in y.as_mut_slice().iter_mut().zip(&noise) {
                            *v *= n;
                        }
                        entries.push(TapeEntry::Dropout { input: x, raw, noise });
                        x = y;
                    }
                    None => {
                        entries.push(TapeEntry::Dropout {
                            input: x.clone(),
                            raw: Vec::new(),
                            noise: Vec::new(),
                        });
                    }
                },
            }
        }
        Ok((
            x,
            ForwardTape {
                version: self.version,
                mode,
                batch: batch.rows(),
                entries,
            },
        ))
    }

    /// Deterministic forward without a tape.
    pub fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            if let Layer::Dense(d) = layer {
                x = d.forward(&x).1;
            }
        }
        Ok(x)
    }

    /// Reverse-mode gradients of a scalar loss given `∂loss/∂output`,
    /// reusing the tape's dropout noise.
    pub fn backward(&self, tape: &ForwardTape<T>, output_grad: &Matrix<T>) -> Result<GradientSet<T>> {
        if tape.version != self.version {
            return Err(Error::StaleTape {
                tape: tape.version,
                network: self.version,
            });
        }
        if output_grad.rows() != tape.batch || output_grad.cols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: tape.batch * self.output_dim(),
                got: output_grad.rows() * output_grad.cols(),
            });
        }
        let mut grads = self.zero_grads();
        let mut slot = grads.tensors.len();
        let mut g = output_grad.clone();
        // Input gradient is unneeded below the first parameterised layer.
        let first_param_layer = self
            .layers
            .iter()
            .position(|l| l.param_count() > 0)
            .unwrap_or(0);
        for (idx, (layer, entry)) in self.layers.iter().zip(&tape.entries).enumerate().rev() {
            let need_input_grad = idx > first_param_layer;
            match (layer, entry) {
                (Layer::Dense(d), TapeEntry::Dense { input, pre }) => {
                    slot -= 2;
                    let (w, b) = grads.tensors[slot..slot + 2].split_at_mut(1);
                    match d.backward(input, pre, &g, &mut w[0], &mut b[0], need_input_grad) {
                        Some(dx) => g = dx,
                        None => break,
                    }
                }
                (Layer::Dropout(d), TapeEntry::Dropout { input, raw, noise }) => {
                    let dla = if layer.param_count() == 1 {
                        slot -= 1;
                        Some(grads.tensors[slot].as_mut_slice())
                    } else {
                        None
                    };
                    if !need_input_grad && dla.is_none() {
                        break;
                    }
                    g = d.backward(input, raw, noise, &g, dla);
                }
                _ => return Err(Error::InvalidConfig("tape does not match network".into())),
            }
        }
        Ok(grads)
    }

    /// Sum of the variational KL penalties (0 without variational layers).
    pub fn kl_penalty(&self) -> T {
        self.dropout_layers()
            .filter(|d| d.kind() == DropoutKind::Variational)
            .map(|d| d.kl_penalty().expect("variational layer"))
            .sum()
    }

    /// Adds `weight * ∂kl_penalty/∂θ` to `grads`.
    pub fn add_kl_grad(&self, weight: T, grads: &mut GradientSet<T>) {
        let mut slot = 0;
        for layer in &self.layers {
            if let Layer::Dropout(d) = layer {
                if d.kind() == DropoutKind::Variational {
                    d.add_kl_grad(weight, &mut grads.tensors[slot]);
                }
            }
            slot += layer.param_count();
        }
    }
}

enum LayerSpec {
    Dense(usize, Activation),
    Dropout(DropoutKind, f64),
}

/// Incremental network builder; dense layers get the initialization of
/// [`DenseLayer::init`].
pub struct MlpBuilder {
    input_dim: usize,
    specs: Vec<LayerSpec>,
}

impl MlpBuilder {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            specs: Vec::new(),
        }
    }

    pub fn dense(mut self, out_dim: usize, activation: Activation) -> Self {
        self.specs.push(LayerSpec::Dense(out_dim, activation));
        self
    }

    pub fn dropout(mut self, kind: DropoutKind, rate: f64) -> Self {
        self.specs.push(LayerSpec::Dropout(kind, rate));
        self
    }

    pub fn build<T: Scalar, R: Rng + ?Sized>(self, rng: &mut R) -> Result<MlpNetwork<T>> {
        let mut dim = self.input_dim;
        let mut layers = Vec::with_capacity(self.specs.len());
        for spec in self.specs {
            match spec {
                LayerSpec::Dense(out, act) => {
                    layers.push(Layer::Dense(DenseLayer::init(dim, out, act, rng)?));
                    dim = out;
                }
                LayerSpec::Dropout(kind, rate) => {
                    layers.push(Layer::Dropout(DropoutLayer::new(kind, dim, rate)?));
                }
            }
        }
        MlpNetwork::from_layers(self.input_dim, layers)
    }
}

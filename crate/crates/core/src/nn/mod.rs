//! Dense networks with manual reverse-mode gradients, dropout layers and ADAM.

pub mod adam;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod network;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{Activation, DenseLayer};
pub use dropout::{DropoutKind, DropoutLayer};
pub use gradcheck::{check_gradients, relative_error, GradCheck};
pub use network::{ForwardTape, GradientSet, Layer, MlpBuilder, MlpNetwork, Mode, TapeEntry};

//! Minimal tensor, layer and optimizer substrate with explicit backprop.
//!
//! There is no autodiff graph: a [`Network`] is an ordered list of layers,
//! `forward_train` records the input of every layer and `backward` walks the
//! list in reverse, accumulating parameter gradients in place.

pub mod checkpoint;
mod gemm;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use layers::{Affine, Conv2d, GradientReversal, Layer, LayerNorm, LayerSpec};
pub use loss::{binary_cross_entropy, softmax_cross_entropy, LossOutput};
pub use network::{Activations, Network};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use tensor::Tensor;

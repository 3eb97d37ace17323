//! Small differentiable network core: batched tensors, a fixed layer
//! vocabulary (conv, dense, activations, concat), reverse-mode gradients and
//! Adam.

mod adam;
pub mod architectures;
mod checkpoint;
mod network;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::{load_params, save_params};
pub use network::{
    clip_global_norm, log_softmax, softmax_in_place, Backward, Gradients, LayerSpec, Network, Tape,
};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("layer {layer} ({kind}) does not chain after {previous}: expected input {expected}, found {found:?}")]
    ShapeMismatch {
        layer: usize,
        kind: &'static str,
        previous: &'static str,
        expected: String,
        found: Vec<usize>,
    },
    #[error("expected per-sample shape {expected:?}, found {found:?}")]
    InputShape { expected: Vec<usize>, found: Vec<usize> },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("concat layer has no side input")]
    MissingSideInput,
    #[error("tape was not produced by a forward pass of this network")]
    TapeMismatch,
    #[error("gradient shapes do not match parameters")]
    GradientShape,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

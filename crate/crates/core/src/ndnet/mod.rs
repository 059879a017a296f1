//! Dense tensors and the reference CNN: forward/backward passes, softmax
//! cross-entropy, Adam, checkpoints and finite-difference verification.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod scalar;
pub mod tensor;

pub use adam::{AdamState, DEFAULT_LR};
pub use loss::{argmax_rows, softmax, softmax_xent, xent_per_example};
pub use network::{LayerEntry, LayerKind, Network, NetworkSpec, Trace, NUM_CLASSES, REPR_TAP};
pub use scalar::{DType, Scalar};
pub use tensor::Tensor;

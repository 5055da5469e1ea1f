//! Two-stream speaker embedding network, trained from scratch in this
//! crate: hand-written forward and backward passes over a small dense
//! tensor type, an RMSprop optimizer, and a named-tensor checkpoint format.
//!
//! The layers live in [`layers`], the assembled architecture in [`model`],
//! and finite-difference gradient verification helpers in [`gradcheck`].

pub mod checkpoint;
pub mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod tensor;

pub use checkpoint::{file_sha256, load_checkpoint, save_checkpoint};
pub use model::{HighStream, LowStream, ModelConfig, SpeakerClassifier, TwoStreamModel, LEAKY_SLOPE};
pub use optim::RmsProp;
pub use tensor::{Param, Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training loss is not finite; step abandoned")]
    NonFiniteLoss,

    #[error("checkpoint version {found} unsupported (this build reads {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    #[error("checkpoint does not fit this model: {0}")]
    Incompatible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

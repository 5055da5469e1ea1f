//! Network building blocks. Every layer follows the same shape: an explicit
//! `forward` that caches whatever the matching `backward` needs, and
//! gradients that accumulate into `Param::grad` until the caller clears them.

pub mod activation;
pub mod conv1d;
pub mod conv2d;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod pool;
pub mod sinc;

pub use activation::LeakyRelu;
pub use conv1d::Conv1d;
pub use conv2d::Conv2d;
pub use linear::Linear;
pub use loss::{argmax_rows, softmax_cross_entropy, softmax_rows};
pub use norm::LayerNorm;
pub use pool::{AdaptiveAvgPool2d, MaxPool1d};
pub use sinc::{bandpass_taps, hamming, SincConv, MIN_BAND_HZ};

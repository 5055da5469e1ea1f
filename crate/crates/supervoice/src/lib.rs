//! Speaker verification that exploits the ultrasonic band of high-rate
//! microphone captures.
//!
//! The crate processes 192 kHz mono recordings along two streams. The low
//! stream is the ordinary voice band, decimated to 16 kHz and fed to a
//! learnable band-pass (sinc) convolution front end. The high stream is the
//! 8-48 kHz region of a high-resolution spectrogram, which carries fricative
//! and breath energy that consumer loudspeakers cannot reproduce. Before any
//! model inference runs, a cheap liveness gate compares band energies of the
//! most ultrasonic-active frames and rejects replayed audio.
//!
//! Module map:
//! - [`audio`]: minimal mono WAV reader and writer (PCM-16 and float-32).
//! - [`preprocess`]: energy-based silence removal and FIR decimation.
//! - [`spectrum`]: STFT, dB conversion, band cropping, frame ranking.
//! - [`voiceprint`]: long-term average spectra and per-speaker voiceprints.
//! - [`liveness`]: replay detection from normalized cumulative band energy.
//! - [`neural`]: from-scratch differentiable layers, the two-stream model,
//!   RMSprop, and checkpoint serialization.
//! - [`pipeline`]: stream preparation, window alignment, embeddings,
//!   enrollment stores, and the verification decision.
//! - [`metrics`]: FAR/FRR, EER and classification-error estimators.
//! - [`synth`]: deterministic synthetic corpus generator with replay device
//!   models, used for end-to-end evaluation without real recordings.
//! - [`rng`]: the fixed, portable PRNG that keeps all of the above
//!   reproducible across platforms.

pub mod audio;
pub mod liveness;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod spectrum;
pub mod synth;
pub mod voiceprint;

pub(crate) mod fir;

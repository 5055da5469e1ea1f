//! Long-term-average spectra and per-speaker voiceprints.
//!
//! Averaging the loudest frames of a decibel spectrogram over time washes
//! out the phonetic content and leaves a per-frequency signature; averaging
//! those signatures across a speaker's utterances gives a stable voiceprint.
//! The verification decision itself comes from the learned embeddings, but
//! these vectors are cheap, interpretable, and good corpus diagnostics.

use thiserror::Error;

use crate::spectrum::{FrameSet, Spectrogram};

#[derive(Debug, Error)]
pub enum VoiceprintError {
    #[error("frame set is empty")]
    EmptyFrameSet,
    #[error("frame set describes {expected} source frames but spectrogram has {got}")]
    FrameCountMismatch { expected: usize, got: usize },
    #[error("LTA list is empty")]
    EmptyList,
    #[error("mismatched bands: {0}")]
    MismatchedBands(String),
}

/// Per-bin mean decibel energy over a chosen set of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LtaVector {
    pub values: Vec<f64>,
    /// Frequency coverage [low, high) in Hz, inherited from the spectrogram.
    pub band: (f64, f64),
    pub frames_used: usize,
}

/// Elementwise mean of a speaker's per-utterance [`LtaVector`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceprintP {
    pub values: Vec<f64>,
    pub band: (f64, f64),
    pub sentence_count: usize,
}

/// Averages the selected frames of `spec` into one value per bin.
pub fn lta(spec: &Spectrogram, frames: &FrameSet) -> Result<LtaVector, VoiceprintError> {
    if frames.is_empty() {
        return Err(VoiceprintError::EmptyFrameSet);
    }
    if frames.source_frames_total != spec.cols() {
        return Err(VoiceprintError::FrameCountMismatch {
            expected: frames.source_frames_total,
            got: spec.cols(),
        });
    }
    let m = frames.len() as f64;
    let values = (0..spec.rows())
        .map(|bin| {
            let row = spec.row(bin);
            frames.indices().iter().map(|&t| row[t]).sum::<f64>() / m
        })
        .collect();
    Ok(LtaVector { values, band: spec.band_hz(), frames_used: frames.len() })
}

/// Elementwise mean over one LTA per enrollment sentence. All inputs must
/// share length and band; order does not matter.
pub fn voiceprint(ltas: &[LtaVector]) -> Result<VoiceprintP, VoiceprintError> {
    let first = ltas.first().ok_or(VoiceprintError::EmptyList)?;
    for (i, l) in ltas.iter().enumerate().skip(1) {
        if l.values.len() != first.values.len() {
            return Err(VoiceprintError::MismatchedBands(format!(
                "LTA 0 has {} bins, LTA {i} has {}",
                first.values.len(),
                l.values.len()
            )));
        }
        if l.band != first.band {
            return Err(VoiceprintError::MismatchedBands(format!(
                "LTA 0 covers {:?} Hz, LTA {i} covers {:?} Hz",
                first.band, l.band
            )));
        }
    }
    let n = ltas.len() as f64;
    let values = (0..first.values.len())
        .map(|bin| ltas.iter().map(|l| l.values[bin]).sum::<f64>() / n)
        .collect();
    Ok(VoiceprintP { values, band: first.band, sentence_count: ltas.len() })
}

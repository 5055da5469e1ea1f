//! Utterance preprocessing: silence removal and integer-factor decimation.
//!
//! Both operate at the buffer's native rate. In the verification pipeline
//! silence is removed from the 192 kHz capture first, and only then is the
//! low stream decimated to 16 kHz, so both streams see the same timeline.

use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::fir;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("empty input buffer")]
    EmptyInput,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("sample rate {source_rate} is not an integer multiple of {target_rate}")]
    NonIntegerRatio { source_rate: u32, target_rate: u32 },
}

/// Parameters for energy-based silence removal.
///
/// The signal is cut into consecutive non-overlapping frames of `frame_len`
/// samples. A frame counts as active when its mean-square power exceeds an
/// adaptive threshold placed `theta_ratio` of the way from the quietest to
/// the loudest frame. Up to `tolerance_frames` consecutive quiet frames are
/// retained after activity, which keeps natural inter-word pauses intact.
#[derive(Debug, Clone)]
pub struct SilenceParams {
    pub frame_len: usize,
    pub theta_ratio: f64,
    pub tolerance_frames: usize,
}

impl SilenceParams {
    /// 50 ms frames, threshold a quarter of the way up the power range,
    /// 25 frames of tolerated quiet.
    pub fn for_rate(sample_rate: u32) -> Self {
        SilenceParams {
            frame_len: (sample_rate / 20) as usize,
            theta_ratio: 0.25,
            tolerance_frames: 25,
        }
    }
}

/// Drops long runs of quiet frames, keeping speech and short pauses.
///
/// Frames are scanned in order with a run counter that resets to zero on
/// every active frame and increments on quiet ones; a frame survives while
/// the counter is at most `tolerance_frames`. The trailing partial frame is
/// always retained. A constant-power signal with nonzero power is returned
/// unchanged, since there is nothing to separate speech from.
pub fn remove_silence(
    buf: &AudioBuffer,
    params: &SilenceParams,
) -> Result<AudioBuffer, PreprocessError> {
    if buf.is_empty() {
        return Err(PreprocessError::EmptyInput);
    }
    if params.frame_len == 0 {
        return Err(PreprocessError::InvalidParams("frame_len must be nonzero".into()));
    }
    if !(0.0..=1.0).contains(&params.theta_ratio) {
        return Err(PreprocessError::InvalidParams(format!(
            "theta_ratio {} outside [0, 1]",
            params.theta_ratio
        )));
    }
    let flen = params.frame_len;
    let n_full = buf.len() / flen;
    if n_full == 0 {
        // Shorter than one frame: nothing we can decide, keep it whole.
        return Ok(buf.clone());
    }

    let powers: Vec<f64> = (0..n_full)
        .map(|i| {
            let frame = &buf.samples[i * flen..(i + 1) * flen];
            frame.iter().map(|&s| f64::from(s) * f64::from(s)).sum::<f64>() / flen as f64
        })
        .collect();
    let min = powers.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min && max > 0.0 {
        return Ok(buf.clone());
    }
    let theta = min + (max - min) * params.theta_ratio;

    let mut kept = Vec::with_capacity(buf.len());
    let mut quiet_run = 0usize;
    for (i, &p) in powers.iter().enumerate() {
        if p > theta {
            quiet_run = 0;
        } else {
            quiet_run += 1;
        }
        if quiet_run <= params.tolerance_frames {
            kept.extend_from_slice(&buf.samples[i * flen..(i + 1) * flen]);
        }
    }
    kept.extend_from_slice(&buf.samples[n_full * flen..]);
    Ok(AudioBuffer::new(kept, buf.sample_rate))
}

/// Anti-aliased integer decimation.
#[derive(Debug, Clone)]
pub struct ResampleSpec {
    pub source_rate: u32,
    pub target_rate: u32,
    pub num_taps: usize,
    pub stopband_db: f64,
}

impl ResampleSpec {
    /// 255-tap Kaiser design with an 80 dB stopband.
    pub fn new(source_rate: u32, target_rate: u32) -> Result<Self, PreprocessError> {
        if target_rate == 0 || source_rate == 0 {
            return Err(PreprocessError::InvalidParams("zero sample rate".into()));
        }
        if source_rate % target_rate != 0 {
            return Err(PreprocessError::NonIntegerRatio { source_rate, target_rate });
        }
        Ok(ResampleSpec {
            source_rate,
            target_rate,
            num_taps: 255,
            stopband_db: 80.0,
        })
    }

    pub fn factor(&self) -> usize {
        (self.source_rate / self.target_rate) as usize
    }
}

/// Low-pass filters at 0.9 of the target Nyquist, then keeps every D-th
/// sample starting from index 0. Output length is ceil(len / D). A factor
/// of 1 leaves the length alone and just applies the filter.
pub fn downsample(buf: &AudioBuffer, spec: &ResampleSpec) -> Result<AudioBuffer, PreprocessError> {
    if buf.is_empty() {
        return Err(PreprocessError::EmptyInput);
    }
    if buf.sample_rate != spec.source_rate {
        return Err(PreprocessError::InvalidParams(format!(
            "buffer rate {} does not match spec source rate {}",
            buf.sample_rate, spec.source_rate
        )));
    }
    let cutoff = 0.9 * f64::from(spec.target_rate) / 2.0;
    let taps = fir::low_pass(
        spec.num_taps,
        cutoff,
        f64::from(spec.source_rate),
        spec.stopband_db,
    );
    let filtered = fir::convolve_same(&buf.samples, &taps);
    let d = spec.factor();
    let out: Vec<f32> = filtered.iter().step_by(d).copied().collect();
    debug_assert_eq!(out.len(), buf.len().div_ceil(d));
    Ok(AudioBuffer::new(out, spec.target_rate))
}

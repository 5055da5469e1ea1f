//! Replay-liveness gate built on four accumulated band energies.
//!
//! Playback hardware betrays itself in the spectrum: ordinary loudspeakers
//! roll off before the ultrasound band, and ultrasonic transducers cannot
//! reproduce low frequencies. After zero-centering the loudest frames of a
//! decibel spectrogram, the signed energy in [24, 48) kHz relative to the
//! whole band (R1) and in [0, 1) kHz relative to [0, 4) kHz (R2) are both
//! positive only for live speech. The verdict is `Live` iff R1 > 0 and
//! R2 > 0; degenerate ratios fail closed as `Spoof`.

use std::fmt;

use thiserror::Error;

use crate::spectrum::{top_m_frames, FrameSet, Spectrogram, SpectrumError};

#[derive(Debug, Error)]
pub enum LivenessError {
    #[error("frame set is empty")]
    EmptyFrameSet,
    #[error("frame set describes {expected} source frames but spectrogram has {got}")]
    FrameCountMismatch { expected: usize, got: usize },
    #[error("band [{low}, {high}) Hz outside energy coverage [{have_low}, {have_high}) Hz")]
    BandOutsideCoverage { low: f64, high: f64, have_low: f64, have_high: f64 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Live,
    Spoof,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Live => "Live",
            Verdict::Spoof => "Spoof",
        })
    }
}

/// Band edges and frame-selection settings for the gate.
#[derive(Debug, Clone)]
pub struct LivenessConfig {
    /// R1 numerator band [low1, high1) Hz; denominator is [0, high1).
    pub low1_hz: f64,
    pub high1_hz: f64,
    /// R2 numerator band [0, low2) Hz; denominator is [0, high2).
    pub low2_hz: f64,
    pub high2_hz: f64,
    /// How many of the loudest frames to accumulate.
    pub frame_count: usize,
    /// Frames are ranked by their energy at and above this frequency.
    pub f_threshold_hz: f64,
}

impl Default for LivenessConfig {
    fn default() -> Self {
        LivenessConfig {
            low1_hz: 24_000.0,
            high1_hz: 48_000.0,
            low2_hz: 1_000.0,
            high2_hz: 4_000.0,
            frame_count: 100,
            f_threshold_hz: 20_000.0,
        }
    }
}

impl LivenessConfig {
    fn validate(&self) -> Result<(), LivenessError> {
        if !(self.low1_hz < self.high1_hz) || !(self.low2_hz < self.high2_hz) {
            return Err(LivenessError::InvalidConfig(
                "band edges must satisfy low < high".into(),
            ));
        }
        if self.frame_count == 0 {
            return Err(LivenessError::InvalidConfig("frame_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-bin signed energy: the sum over selected frames minus the selection
/// size times the spectrogram's global mean cell value.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEnergy {
    pub values: Vec<f64>,
    /// Absolute index of the first bin, matching the source spectrogram.
    pub first_bin: usize,
    pub freq_resolution: f64,
    pub frames_used: usize,
}

impl NormalizedEnergy {
    /// Frequency coverage [low, high) in Hz.
    pub fn band_hz(&self) -> (f64, f64) {
        (
            self.first_bin as f64 * self.freq_resolution,
            (self.first_bin + self.values.len()) as f64 * self.freq_resolution,
        )
    }
}

/// The four scalars the verdict is computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEnergies {
    pub r1_numerator: f64,
    pub r1_denominator: f64,
    pub r2_numerator: f64,
    pub r2_denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LivenessReport {
    pub r1: f64,
    pub r2: f64,
    pub verdict: Verdict,
    pub energies: BandEnergies,
}

/// Zero-centers the summed energy of the selected frames. Subtracting the
/// global mean once per selected frame makes the sign of each bin say
/// "louder or quieter than a typical cell", which is what the ratios need;
/// it also cancels any overall gain on the recording.
pub fn normalized_cumulative_energy(
    spec: &Spectrogram,
    frames: &FrameSet,
) -> Result<NormalizedEnergy, LivenessError> {
    if frames.is_empty() {
        return Err(LivenessError::EmptyFrameSet);
    }
    if frames.source_frames_total != spec.cols() {
        return Err(LivenessError::FrameCountMismatch {
            expected: frames.source_frames_total,
            got: spec.cols(),
        });
    }
    let global_mean = spec.values().iter().sum::<f64>() / spec.values().len() as f64;
    let offset = frames.len() as f64 * global_mean;
    let values = (0..spec.rows())
        .map(|bin| {
            let row = spec.row(bin);
            frames.indices().iter().map(|&t| row[t]).sum::<f64>() - offset
        })
        .collect();
    Ok(NormalizedEnergy {
        values,
        first_bin: spec.first_bin(),
        freq_resolution: spec.freq_resolution(),
        frames_used: frames.len(),
    })
}

/// Sums bins b with `f_low <= b * resolution < f_high` (absolute index b).
fn band_sum(ne: &NormalizedEnergy, f_low: f64, f_high: f64) -> Result<f64, LivenessError> {
    let start = (f_low / ne.freq_resolution).ceil() as usize;
    let end = (f_high / ne.freq_resolution).ceil() as usize;
    if start < ne.first_bin || end > ne.first_bin + ne.values.len() {
        let (have_low, have_high) = ne.band_hz();
        return Err(LivenessError::BandOutsideCoverage {
            low: f_low,
            high: f_high,
            have_low,
            have_high,
        });
    }
    Ok(ne.values[start - ne.first_bin..end - ne.first_bin].iter().sum())
}

/// A zero denominator yields a signed-infinity sentinel (sign of the
/// numerator, negative for a zero numerator) which the decision rule
/// treats as spoof.
fn ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator == 0.0 {
        if numerator > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        numerator / denominator
    }
}

fn ratio_with_parts(
    ne: &NormalizedEnergy,
    num_band: (f64, f64),
    den_band: (f64, f64),
) -> Result<(f64, f64, f64), LivenessError> {
    let num = band_sum(ne, num_band.0, num_band.1)?;
    let den = band_sum(ne, den_band.0, den_band.1)?;
    Ok((ratio(num, den), num, den))
}

/// Share of the signed energy lying in the ultrasound band [low1, high1)
/// relative to everything below high1.
pub fn r1(ne: &NormalizedEnergy, config: &LivenessConfig) -> Result<f64, LivenessError> {
    config.validate()?;
    let (r, _, _) =
        ratio_with_parts(ne, (config.low1_hz, config.high1_hz), (0.0, config.high1_hz))?;
    Ok(r)
}

/// Share of the signed energy below low2 relative to everything below high2.
pub fn r2(ne: &NormalizedEnergy, config: &LivenessConfig) -> Result<f64, LivenessError> {
    config.validate()?;
    let (r, _, _) = ratio_with_parts(ne, (0.0, config.low2_hz), (0.0, config.high2_hz))?;
    Ok(r)
}

/// Live iff both ratios are strictly positive and finite.
pub fn liveness_decision(r1: f64, r2: f64) -> Verdict {
    if r1.is_finite() && r2.is_finite() && r1 > 0.0 && r2 > 0.0 {
        Verdict::Live
    } else {
        Verdict::Spoof
    }
}

/// Runs the whole gate on a full-band decibel spectrogram: frame selection,
/// zero-centering, both ratios, verdict.
pub fn analyze(
    spec: &Spectrogram,
    config: &LivenessConfig,
) -> Result<LivenessReport, LivenessError> {
    config.validate()?;
    let frames = top_m_frames(spec, config.frame_count, config.f_threshold_hz)?;
    let ne = normalized_cumulative_energy(spec, &frames)?;
    let (r1, n1, d1) =
        ratio_with_parts(&ne, (config.low1_hz, config.high1_hz), (0.0, config.high1_hz))?;
    let (r2, n2, d2) =
        ratio_with_parts(&ne, (0.0, config.low2_hz), (0.0, config.high2_hz))?;
    Ok(LivenessReport {
        r1,
        r2,
        verdict: liveness_decision(r1, r2),
        energies: BandEnergies {
            r1_numerator: n1,
            r1_denominator: d1,
            r2_numerator: n2,
            r2_denominator: d2,
        },
    })
}

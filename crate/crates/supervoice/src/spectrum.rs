//! STFT spectrograms, decibel conversion, band cropping and frame ranking.
//!
//! The default analysis runs a 2048-point FFT over 2048-sample Hann windows
//! with a quarter-window hop. At 192 kHz that yields a 93.75 Hz bin pitch
//! and 1024 stored rows (DC up to, but excluding, Nyquist), which is fine
//! enough to resolve the ultrasonic structure the rest of the crate feeds on.

use std::io::{self, Read, Write};

use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

use crate::audio::AudioBuffer;

/// Decibel floor applied to every spectrogram this crate produces.
pub const DB_FLOOR: f64 = -100.0;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("input too short: need at least {needed} samples, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("band [{low}, {high}) Hz outside spectrogram coverage [{have_low}, {have_high}) Hz")]
    BandOutOfRange { low: f64, high: f64, have_low: f64, have_high: f64 },
    #[error("invalid frame set: {0}")]
    InvalidFrameSet(String),
    #[error("bad spectrogram file: {0}")]
    BadFile(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Window taper. Only Hann is used; the enum keeps configs self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
}

#[derive(Debug, Clone)]
pub struct StftConfig {
    pub n_fft: usize,
    pub win_len: usize,
    pub hop: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    /// 2048-point window and FFT, hop of a quarter window.
    fn default() -> Self {
        StftConfig { n_fft: 2048, win_len: 2048, hop: 512, window: WindowKind::Hann }
    }
}

impl StftConfig {
    /// High time-resolution preset: 10 ms windows with a 2 ms hop, padded to
    /// a 2048-point FFT. Useful for inspecting transients; the verification
    /// pipeline itself stays on the default.
    pub fn fine_time(sample_rate: u32) -> Self {
        let win_len = (sample_rate / 100) as usize;
        StftConfig {
            n_fft: win_len.next_power_of_two().max(2048),
            win_len,
            hop: (sample_rate / 500) as usize,
            window: WindowKind::Hann,
        }
    }

    fn validate(&self) -> Result<(), SpectrumError> {
        if self.hop == 0 || self.win_len == 0 {
            return Err(SpectrumError::InvalidConfig("window and hop must be nonzero".into()));
        }
        if self.win_len > self.n_fft {
            return Err(SpectrumError::InvalidConfig(format!(
                "win_len {} exceeds n_fft {}",
                self.win_len, self.n_fft
            )));
        }
        if self.n_fft % 2 != 0 {
            return Err(SpectrumError::InvalidConfig("n_fft must be even".into()));
        }
        Ok(())
    }
}

/// How the stored values are scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Raw magnitudes out of the FFT.
    Linear,
    /// 20*log10(m / max), clamped below at `floor`.
    Decibel { floor: f64 },
}

/// A time-frequency matrix, row per frequency bin, column per frame.
///
/// `first_bin` is the absolute index of row 0 in the analysis that produced
/// the matrix, so band-cropped views keep their true frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<f64>, // row-major, rows x cols
    rows: usize,
    cols: usize,
    first_bin: usize,
    pub sample_rate: u32,
    pub hop: usize,
    freq_resolution: f64,
    pub scale: Scale,
}

impl Spectrogram {
    /// Builds a matrix directly from row-major values. `freq_resolution` is
    /// the Hz pitch between adjacent bins and `first_bin` the absolute index
    /// of row 0. Exists for toy matrices in tests and for tools that load
    /// exported spectrograms; analysis code should go through [`stft`].
    #[allow(clippy::too_many_arguments)]
    pub fn from_values(
        values: Vec<f64>,
        rows: usize,
        cols: usize,
        first_bin: usize,
        freq_resolution: f64,
        sample_rate: u32,
        hop: usize,
        scale: Scale,
    ) -> Result<Spectrogram, SpectrumError> {
        if values.len() != rows * cols {
            return Err(SpectrumError::InvalidConfig(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if !(freq_resolution > 0.0) {
            return Err(SpectrumError::InvalidConfig(
                "freq_resolution must be positive".into(),
            ));
        }
        Ok(Spectrogram {
            values,
            rows,
            cols,
            first_bin,
            sample_rate,
            hop,
            freq_resolution,
            scale,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn first_bin(&self) -> usize {
        self.first_bin
    }

    /// Hz per bin.
    pub fn freq_resolution(&self) -> f64 {
        self.freq_resolution
    }

    /// Frequency coverage [low, high) in Hz.
    pub fn band_hz(&self) -> (f64, f64) {
        (
            self.first_bin as f64 * self.freq_resolution,
            (self.first_bin + self.rows) as f64 * self.freq_resolution,
        )
    }

    pub fn value(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.cols + frame]
    }

    /// All frames of one bin, time-contiguous.
    pub fn row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.cols..(bin + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Restricts to bins b with `f_low <= b * resolution < f_high`, where b
    /// is the absolute bin index. Cropping a crop composes the natural way.
    pub fn crop_band(&self, f_low: f64, f_high: f64) -> Result<Spectrogram, SpectrumError> {
        if !(f_low >= 0.0 && f_low < f_high) {
            return Err(SpectrumError::InvalidConfig(format!(
                "bad band: [{f_low}, {f_high})"
            )));
        }
        let start = (f_low / self.freq_resolution).ceil() as usize;
        let end = (f_high / self.freq_resolution).ceil() as usize;
        let (have_low, have_high) = self.band_hz();
        if start < self.first_bin || end > self.first_bin + self.rows || start >= end {
            return Err(SpectrumError::BandOutOfRange {
                low: f_low,
                high: f_high,
                have_low,
                have_high,
            });
        }
        let lo = start - self.first_bin;
        let hi = end - self.first_bin;
        Ok(Spectrogram {
            values: self.values[lo * self.cols..hi * self.cols].to_vec(),
            rows: hi - lo,
            cols: self.cols,
            first_bin: start,
            sample_rate: self.sample_rate,
            hop: self.hop,
            freq_resolution: self.freq_resolution,
            scale: self.scale,
        })
    }

    /// Serializes as a small header (rows, cols, sample_rate, hop as u32
    /// little-endian) followed by row-major float-32 values.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<(), SpectrumError> {
        w.write_all(b"SVSG")?;
        for v in [self.rows as u32, self.cols as u32, self.sample_rate, self.hop as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

/// A raw matrix read back from [`Spectrogram::write_binary`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedSpectrogram {
    pub rows: usize,
    pub cols: usize,
    pub sample_rate: u32,
    pub hop: usize,
    pub values: Vec<f32>,
}

pub fn read_binary(r: &mut impl Read) -> Result<ExportedSpectrogram, SpectrumError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"SVSG" {
        return Err(SpectrumError::BadFile("missing SVSG magic".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut next = || -> Result<u32, SpectrumError> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let rows = next()? as usize;
    let cols = next()? as usize;
    let sample_rate = next()?;
    let hop = next()? as usize;
    let mut values = vec![0f32; rows.checked_mul(cols).ok_or_else(|| {
        SpectrumError::BadFile("dimension overflow".into())
    })?];
    let mut fbuf = [0u8; 4];
    for v in &mut values {
        r.read_exact(&mut fbuf)?;
        *v = f32::from_le_bytes(fbuf);
    }
    Ok(ExportedSpectrogram { rows, cols, sample_rate, hop, values })
}

/// Linear-magnitude STFT. Frames start at multiples of the hop; the last
/// partial window is dropped, giving floor((len - win) / hop) + 1 columns.
/// Rows cover DC through the bin below Nyquist.
pub fn stft_magnitudes(
    buf: &AudioBuffer,
    cfg: &StftConfig,
) -> Result<Spectrogram, SpectrumError> {
    cfg.validate()?;
    if buf.len() < cfg.win_len {
        return Err(SpectrumError::InputTooShort { needed: cfg.win_len, got: buf.len() });
    }
    let cols = (buf.len() - cfg.win_len) / cfg.hop + 1;
    let rows = cfg.n_fft / 2;
    let window = hann(cfg.win_len);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.n_fft);
    let mut frame = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut values = vec![0.0f64; rows * cols];

    for t in 0..cols {
        let start = t * cfg.hop;
        for (i, c) in frame.iter_mut().enumerate() {
            *c = if i < cfg.win_len {
                Complex::new(f64::from(buf.samples[start + i]) * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut frame);
        for (bin, c) in frame[..rows].iter().enumerate() {
            values[bin * cols + t] = c.norm();
        }
    }

    Ok(Spectrogram {
        values,
        rows,
        cols,
        first_bin: 0,
        sample_rate: buf.sample_rate,
        hop: cfg.hop,
        freq_resolution: f64::from(buf.sample_rate) / cfg.n_fft as f64,
        scale: Scale::Linear,
    })
}

/// Decibel STFT: [`stft_magnitudes`] followed by [`to_db`] with the crate
/// floor. This is the form every downstream consumer takes.
pub fn stft(buf: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram, SpectrumError> {
    let mut spec = stft_magnitudes(buf, cfg)?;
    spec.values = to_db(&spec.values, DB_FLOOR);
    spec.scale = Scale::Decibel { floor: DB_FLOOR };
    Ok(spec)
}

/// Converts magnitudes to decibels relative to their own maximum, clamped
/// below at `floor_db`. An all-zero input maps entirely to the floor, and a
/// global gain on the input cancels out exactly.
pub fn to_db(magnitudes: &[f64], floor_db: f64) -> Vec<f64> {
    let reference = magnitudes.iter().cloned().fold(0.0f64, f64::max);
    if reference <= 0.0 {
        return vec![floor_db; magnitudes.len()];
    }
    magnitudes
        .iter()
        .map(|&m| {
            if m <= 0.0 {
                floor_db
            } else {
                (20.0 * (m / reference).log10()).max(floor_db)
            }
        })
        .collect()
}

/// A selection of frame indices out of a spectrogram, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSet {
    indices: Vec<usize>,
    pub source_frames_total: usize,
}

impl FrameSet {
    /// Indices must be strictly increasing and within the source frame count.
    pub fn new(indices: Vec<usize>, source_frames_total: usize) -> Result<Self, SpectrumError> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(SpectrumError::InvalidFrameSet(
                    "indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= source_frames_total {
                return Err(SpectrumError::InvalidFrameSet(format!(
                    "index {last} out of range for {source_frames_total} frames"
                )));
            }
        }
        Ok(FrameSet { indices, source_frames_total })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Picks the `m` frames with the largest summed value over all bins at or
/// above `f_threshold` Hz. Ties go to the earlier frame; if the spectrogram
/// has `m` or fewer frames, all of them are selected. When the threshold
/// lies above the covered band every frame scores zero and the earliest
/// frames win, which keeps the selection total and deterministic.
pub fn top_m_frames(
    spec: &Spectrogram,
    m: usize,
    f_threshold: f64,
) -> Result<FrameSet, SpectrumError> {
    if m == 0 {
        return Err(SpectrumError::InvalidConfig("m must be at least 1".into()));
    }
    let abs_start = (f_threshold / spec.freq_resolution()).ceil() as usize;
    let row_start = abs_start.saturating_sub(spec.first_bin).min(spec.rows);

    let mut scores = vec![0.0f64; spec.cols];
    for bin in row_start..spec.rows {
        for (t, &v) in spec.row(bin).iter().enumerate() {
            scores[t] += v;
        }
    }

    let mut order: Vec<usize> = (0..spec.cols).collect();
    order.sort_by(|&a, &b| {
        scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(&b))
    });
    let take = m.min(spec.cols);
    let mut chosen: Vec<usize> = order[..take].to_vec();
    chosen.sort_unstable();
    FrameSet::new(chosen, spec.cols)
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / len as f64).cos())
        .collect()
}

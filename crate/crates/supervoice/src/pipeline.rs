//! End-to-end verification pipeline: raw audio in, liveness verdict and
//! speaker embedding out, plus an on-disk enrollment store.
//!
//! The stages compose the rest of the crate in a fixed order. Silence is
//! trimmed at the capture rate, a single wideband spectrogram feeds the
//! replay gate, and only audio that passes the gate is windowed into the
//! two-stream network. Spoofed input never reaches the model.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::liveness::{self, LivenessConfig, LivenessError, LivenessReport, Verdict};
use crate::neural::{
    file_sha256, load_checkpoint, ModelConfig, NeuralError, Tensor, TwoStreamModel,
};
use crate::preprocess::{downsample, remove_silence, PreprocessError, ResampleSpec, SilenceParams};
use crate::spectrum::{stft, Spectrogram, SpectrumError, StftConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(
        "utterance too short to window: {low} low-rate samples (need {low_needed}) and \
         {hf_cols} spectrogram columns (need {hf_needed})"
    )]
    InputTooShort {
        low: usize,
        low_needed: usize,
        hf_cols: usize,
        hf_needed: usize,
    },
    #[error("vector lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("no speaker {0:?} in the enrollment store")]
    UnknownSpeaker(String),
    #[error("query rejected as replayed audio (r1 {r1:.4}, r2 {r2:.4})")]
    SpoofDetected { r1: f64, r2: f64 },
    #[error(
        "enrollment utterance {index} failed the liveness gate \
         (r1 {r1:.4}, r2 {r2:.4}); nothing was enrolled"
    )]
    LivenessRejected { index: usize, r1: f64, r2: f64 },
    #[error("store was built with model {store} but the loaded model hashes to {current}")]
    HashMismatch { store: String, current: String },
    #[error("embedding dimension {got} does not match the store's {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad enrollment store: {0}")]
    BadStore(String),
    #[error("audio rate {rate} Hz does not fit the pipeline (expected {expected} Hz)")]
    RateMismatch { rate: u32, expected: u32 },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Liveness(#[from] LivenessError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How waveform windows for the low stream line up with spectrogram columns
/// for the high stream.
///
/// The low stream slides a `low_window`-sample window over the downsampled
/// waveform in steps of `low_hop`. Each window covers `low_window * alpha`
/// samples of the original capture, which spans a fixed number of STFT
/// columns; `alpha` is the downsampling factor and `stft_hop` the analysis
/// hop at the capture rate. Column starts are rounded to the nearest column,
/// so they drift off a fixed stride whenever the exact ratio is fractional.
#[derive(Debug, Clone)]
pub struct AlignConfig {
    pub low_window: usize,
    pub low_hop: usize,
    pub alpha: usize,
    pub stft_hop: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            low_window: 3200,
            low_hop: 160,
            alpha: 12,
            stft_hop: 512,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.low_window == 0 || self.low_hop == 0 || self.alpha == 0 || self.stft_hop == 0 {
            return Err(PipelineError::InvalidConfig(
                "alignment fields must be nonzero".into(),
            ));
        }
        if (self.low_window * self.alpha) % self.stft_hop != 0 {
            return Err(PipelineError::InvalidConfig(format!(
                "window of {} low-rate samples covers {} capture samples, \
                 which is not a whole number of {}-sample hops",
                self.low_window,
                self.low_window * self.alpha,
                self.stft_hop
            )));
        }
        Ok(())
    }

    /// Spectrogram columns covered by one low-stream window.
    pub fn high_window(&self) -> usize {
        self.low_window * self.alpha / self.stft_hop
    }

    /// First spectrogram column for the k-th window, rounded to nearest.
    pub fn high_start(&self, k: usize) -> usize {
        let ratio = (self.low_hop * self.alpha) as f64 / self.stft_hop as f64;
        (k as f64 * ratio).round() as usize
    }
}

/// One aligned training or inference window: a waveform slice for the low
/// stream and the matching column range of the band-cropped spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPair {
    pub low_start: usize,
    pub high_start: usize,
}

/// Enumerate every window that fits in both representations.
pub fn align_windows(
    low_len: usize,
    hf_cols: usize,
    cfg: &AlignConfig,
) -> Result<Vec<WindowPair>, PipelineError> {
    cfg.validate()?;
    let h_win = cfg.high_window();
    let mut pairs = Vec::new();
    let mut k = 0usize;
    loop {
        let low_start = k * cfg.low_hop;
        let high_start = cfg.high_start(k);
        if low_start + cfg.low_window > low_len || high_start + h_win > hf_cols {
            break;
        }
        pairs.push(WindowPair {
            low_start,
            high_start,
        });
        k += 1;
    }
    if pairs.is_empty() {
        return Err(PipelineError::InputTooShort {
            low: low_len,
            low_needed: cfg.low_window,
            hf_cols,
            hf_needed: h_win,
        });
    }
    Ok(pairs)
}

/// Cosine similarity with f64 accumulation. A zero vector has no direction,
/// so any comparison against it scores 0 rather than dividing by zero.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, PipelineError> {
    if a.len() != b.len() {
        return Err(PipelineError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let mut dot = 0f64;
    let mut na = 0f64;
    let mut nb = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

const STORE_MAGIC: &[u8; 4] = b"SVES";
const STORE_VERSION: u32 = 1;
const MAX_STORE_STRING: usize = 1 << 16;
const MAX_STORE_RECORDS: usize = 1 << 24;

/// On-disk collection of enrolled speaker embeddings, bound to the model
/// checkpoint that produced them so stale stores are refused instead of
/// silently producing garbage similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentStore {
    dim: usize,
    checkpoint_hash: String,
    speakers: BTreeMap<String, Vec<Vec<f32>>>,
}

impl EnrollmentStore {
    pub fn new(dim: usize, checkpoint_hash: String) -> Self {
        EnrollmentStore {
            dim,
            checkpoint_hash,
            speakers: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn checkpoint_hash(&self) -> &str {
        &self.checkpoint_hash
    }

    pub fn speakers(&self) -> impl Iterator<Item = &str> {
        self.speakers.keys().map(String::as_str)
    }

    pub fn embeddings(&self, speaker: &str) -> Option<&[Vec<f32>]> {
        self.speakers.get(speaker).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn add(&mut self, speaker: &str, embedding: Vec<f32>) -> Result<(), PipelineError> {
        if embedding.len() != self.dim {
            return Err(PipelineError::DimensionMismatch {
                expected: self.dim,
                got: embedding.len(),
            });
        }
        self.speakers
            .entry(speaker.to_string())
            .or_default()
            .push(embedding);
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(STORE_MAGIC)?;
        w.write_u32::<LittleEndian>(STORE_VERSION)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        write_string(&mut w, &self.checkpoint_hash)?;
        w.write_u32::<LittleEndian>(self.speakers.len() as u32)?;
        for (speaker, embeddings) in &self.speakers {
            write_string(&mut w, speaker)?;
            w.write_u32::<LittleEndian>(embeddings.len() as u32)?;
            for emb in embeddings {
                for &v in emb {
                    w.write_f32::<LittleEndian>(v)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let mut r = BufReader::new(File::open(path)?);
        let result = Self::read_from(&mut r);
        if let Err(PipelineError::Io(e)) = &result {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                return Err(PipelineError::BadStore("file ends mid-record".into()));
            }
        }
        let store = result?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(PipelineError::BadStore(
                "trailing bytes after the last record".into(),
            ));
        }
        Ok(store)
    }

    fn read_from(r: &mut impl Read) -> Result<Self, PipelineError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != STORE_MAGIC {
            return Err(PipelineError::BadStore(
                "not an enrollment store (bad magic)".into(),
            ));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != STORE_VERSION {
            return Err(PipelineError::BadStore(format!(
                "unsupported store version {version}"
            )));
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        if dim == 0 || dim > MAX_STORE_RECORDS {
            return Err(PipelineError::BadStore(format!(
                "implausible embedding dimension {dim}"
            )));
        }
        let checkpoint_hash = read_string(r)?;
        let speaker_count = r.read_u32::<LittleEndian>()? as usize;
        if speaker_count > MAX_STORE_RECORDS {
            return Err(PipelineError::BadStore(format!(
                "implausible speaker count {speaker_count}"
            )));
        }
        let mut speakers = BTreeMap::new();
        for _ in 0..speaker_count {
            let name = read_string(r)?;
            let emb_count = r.read_u32::<LittleEndian>()? as usize;
            if emb_count > MAX_STORE_RECORDS {
                return Err(PipelineError::BadStore(format!(
                    "implausible embedding count {emb_count} for {name:?}"
                )));
            }
            let mut embeddings = Vec::with_capacity(emb_count);
            for _ in 0..emb_count {
                let mut emb = vec![0f32; dim];
                for v in &mut emb {
                    *v = r.read_f32::<LittleEndian>()?;
                }
                embeddings.push(emb);
            }
            if speakers.insert(name.clone(), embeddings).is_some() {
                return Err(PipelineError::BadStore(format!(
                    "speaker {name:?} appears twice"
                )));
            }
        }
        Ok(EnrollmentStore {
            dim,
            checkpoint_hash,
            speakers,
        })
    }
}

fn write_string(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_string(r: &mut impl Read) -> Result<String, PipelineError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > MAX_STORE_STRING {
        return Err(PipelineError::BadStore(format!(
            "implausible string length {len}"
        )));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| PipelineError::BadStore("string is not UTF-8".into()))
}

/// What `Pipeline::process` produced for one utterance.
#[derive(Debug, Clone)]
pub enum UtteranceOutcome {
    /// The replay gate rejected the audio; the network never ran.
    Spoof { report: LivenessReport },
    /// The audio passed the gate; `embedding` is the mean over all aligned
    /// windows the utterance yielded.
    Live {
        report: LivenessReport,
        embedding: Vec<f32>,
        windows: usize,
    },
}

/// Outcome of a verification trial against an enrolled speaker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyDecision {
    pub accepted: bool,
    pub similarity: f64,
    pub threshold: f64,
}

/// The full chain from capture-rate audio to speaker embedding.
pub struct Pipeline {
    model: TwoStreamModel<f32>,
    checkpoint_hash: String,
    pub stft: StftConfig,
    pub liveness: LivenessConfig,
    pub align: AlignConfig,
    /// Band kept for the high stream, in Hz.
    pub band: (f64, f64),
    /// Rate the low stream runs at after downsampling.
    pub target_rate: u32,
    /// Windows per forward pass when embedding an utterance.
    pub batch: usize,
    /// Cap on windows embedded per utterance, 0 for no cap. When capped,
    /// windows are taken evenly spaced across the utterance, trading
    /// embedding stability for speed.
    pub max_windows: usize,
}

/// Indices of `cap` elements spread evenly over `0..n` (all of them when
/// `cap` is 0 or not smaller than `n`).
fn spaced_subset(n: usize, cap: usize) -> Vec<usize> {
    if cap == 0 || cap >= n {
        (0..n).collect()
    } else {
        (0..cap).map(|i| i * n / cap).collect()
    }
}

impl Pipeline {
    /// Wrap an already-loaded model. The hash travels into every store this
    /// pipeline writes.
    pub fn new(model: TwoStreamModel<f32>, checkpoint_hash: String) -> Result<Self, PipelineError> {
        let p = Pipeline {
            model,
            checkpoint_hash,
            stft: StftConfig::default(),
            liveness: LivenessConfig::default(),
            align: AlignConfig::default(),
            band: (8_000.0, 48_000.0),
            target_rate: 16_000,
            batch: 16,
            max_windows: 0,
        };
        p.check_consistency()?;
        Ok(p)
    }

    pub fn from_checkpoint(
        path: impl AsRef<Path>,
        config: &ModelConfig,
    ) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let model = load_checkpoint(path, config)?;
        let hash = file_sha256(path)?;
        Pipeline::new(model, hash)
    }

    fn check_consistency(&self) -> Result<(), PipelineError> {
        self.align.validate()?;
        let cfg = &self.model.config;
        if cfg.low_window != self.align.low_window {
            return Err(PipelineError::InvalidConfig(format!(
                "model expects {}-sample windows but alignment produces {}",
                cfg.low_window, self.align.low_window
            )));
        }
        if cfg.hf_cols != self.align.high_window() {
            return Err(PipelineError::InvalidConfig(format!(
                "model expects {} spectrogram columns per window but alignment produces {}",
                cfg.hf_cols,
                self.align.high_window()
            )));
        }
        if self.batch == 0 {
            return Err(PipelineError::InvalidConfig("batch must be nonzero".into()));
        }
        Ok(())
    }

    pub fn checkpoint_hash(&self) -> &str {
        &self.checkpoint_hash
    }

    pub fn model(&self) -> &TwoStreamModel<f32> {
        &self.model
    }

    pub fn embed_dim(&self) -> usize {
        self.model.embed_dim()
    }

    /// Capture rate this pipeline is configured for.
    pub fn expected_rate(&self) -> u32 {
        self.target_rate * self.align.alpha as u32
    }

    /// Trim silence, run the replay gate, and if the audio is judged live,
    /// embed it. The verdict always comes back; the network only runs on
    /// live audio.
    pub fn process(&mut self, audio: &AudioBuffer) -> Result<UtteranceOutcome, PipelineError> {
        let expected = self.expected_rate();
        if audio.sample_rate != expected {
            return Err(PipelineError::RateMismatch {
                rate: audio.sample_rate,
                expected,
            });
        }
        let trimmed = remove_silence(audio, &SilenceParams::for_rate(audio.sample_rate))?;
        let spec = stft(&trimmed, &self.stft)?;
        let report = liveness::analyze(&spec, &self.liveness)?;
        if report.verdict == Verdict::Spoof {
            return Ok(UtteranceOutcome::Spoof { report });
        }

        let resample = ResampleSpec::new(trimmed.sample_rate, self.target_rate)?;
        if resample.factor() != self.align.alpha {
            return Err(PipelineError::InvalidConfig(format!(
                "downsampling by {} but windows align assuming {}",
                resample.factor(),
                self.align.alpha
            )));
        }
        let low = downsample(&trimmed, &resample)?;
        let high = spec.crop_band(self.band.0, self.band.1)?;
        if high.rows() != self.model.config.hf_rows {
            return Err(PipelineError::InvalidConfig(format!(
                "band [{}, {}) Hz yields {} spectrogram rows but the model expects {}",
                self.band.0,
                self.band.1,
                high.rows(),
                self.model.config.hf_rows
            )));
        }
        let all_pairs = align_windows(low.len(), high.cols(), &self.align)?;
        let pairs: Vec<WindowPair> = spaced_subset(all_pairs.len(), self.max_windows)
            .into_iter()
            .map(|i| all_pairs[i])
            .collect();
        let embedding = self.embed_windows(&low, &high, &pairs)?;
        Ok(UtteranceOutcome::Live {
            report,
            embedding,
            windows: pairs.len(),
        })
    }

    /// Mean embedding over the given aligned windows, batched through the
    /// model. Accumulates in f64 so window order cannot perturb the result.
    fn embed_windows(
        &mut self,
        low: &AudioBuffer,
        high: &Spectrogram,
        pairs: &[WindowPair],
    ) -> Result<Vec<f32>, PipelineError> {
        let dim = self.model.embed_dim();
        let l_win = self.align.low_window;
        let h_win = self.align.high_window();
        let rows = high.rows();
        let mut sum = vec![0f64; dim];
        for chunk in pairs.chunks(self.batch) {
            let b = chunk.len();
            let mut low_in = Tensor::<f32>::zeros(&[b, l_win]);
            let mut high_in = Tensor::<f32>::zeros(&[b, 1, rows, h_win]);
            for (i, pair) in chunk.iter().enumerate() {
                let src = &low.samples[pair.low_start..pair.low_start + l_win];
                low_in.data_mut()[i * l_win..(i + 1) * l_win].copy_from_slice(src);
                let dst = high_in.data_mut();
                for r in 0..rows {
                    let row = &high.row(r)[pair.high_start..pair.high_start + h_win];
                    for (c, &v) in row.iter().enumerate() {
                        dst[(i * rows + r) * h_win + c] = v as f32;
                    }
                }
            }
            let out = self.model.embed(&low_in, &high_in)?;
            for i in 0..b {
                for d in 0..dim {
                    sum[d] += out.data()[i * dim + d] as f64;
                }
            }
        }
        let n = pairs.len() as f64;
        Ok(sum.iter().map(|&v| (v / n) as f32).collect())
    }

    /// Enroll a speaker from several utterances. Every utterance must pass
    /// the liveness gate before anything is written, so a single replayed
    /// recording cannot poison the profile.
    pub fn enroll(
        &mut self,
        store: &mut EnrollmentStore,
        speaker: &str,
        utterances: &[AudioBuffer],
    ) -> Result<usize, PipelineError> {
        self.check_store(store)?;
        if utterances.is_empty() {
            return Err(PipelineError::InvalidConfig(
                "enrollment needs at least one utterance".into(),
            ));
        }
        let mut embeddings = Vec::with_capacity(utterances.len());
        for (index, utt) in utterances.iter().enumerate() {
            match self.process(utt)? {
                UtteranceOutcome::Live { embedding, .. } => embeddings.push(embedding),
                UtteranceOutcome::Spoof { report } => {
                    return Err(PipelineError::LivenessRejected {
                        index,
                        r1: report.r1,
                        r2: report.r2,
                    });
                }
            }
        }
        let n = embeddings.len();
        for emb in embeddings {
            store.add(speaker, emb)?;
        }
        Ok(n)
    }

    /// Compare a query utterance against a speaker's enrolled embeddings.
    /// The similarity is the mean cosine over the enrolled set; the claim is
    /// accepted when it reaches `threshold`. Replayed audio is an error, not
    /// a low score.
    pub fn verify(
        &mut self,
        store: &EnrollmentStore,
        speaker: &str,
        audio: &AudioBuffer,
        threshold: f64,
    ) -> Result<VerifyDecision, PipelineError> {
        self.check_store(store)?;
        let enrolled = store
            .embeddings(speaker)
            .ok_or_else(|| PipelineError::UnknownSpeaker(speaker.to_string()))?;
        let query = match self.process(audio)? {
            UtteranceOutcome::Live { embedding, .. } => embedding,
            UtteranceOutcome::Spoof { report } => {
                return Err(PipelineError::SpoofDetected {
                    r1: report.r1,
                    r2: report.r2,
                });
            }
        };
        let mut total = 0f64;
        for emb in enrolled {
            total += cosine_similarity(emb, &query)?;
        }
        let similarity = total / enrolled.len() as f64;
        Ok(VerifyDecision {
            accepted: similarity >= threshold,
            similarity,
            threshold,
        })
    }

    fn check_store(&self, store: &EnrollmentStore) -> Result<(), PipelineError> {
        if store.checkpoint_hash() != self.checkpoint_hash {
            return Err(PipelineError::HashMismatch {
                store: store.checkpoint_hash().to_string(),
                current: self.checkpoint_hash.clone(),
            });
        }
        if store.dim() != self.model.embed_dim() {
            return Err(PipelineError::DimensionMismatch {
                expected: store.dim(),
                got: self.model.embed_dim(),
            });
        }
        Ok(())
    }
}

/// Two-stream inputs extracted from one utterance, ready to batch into the
/// model: `low[i]` is a waveform window, `high[i]` the matching band-cropped
/// spectrogram patch flattened row-major over `rows` by the column span.
#[derive(Debug, Clone)]
pub struct UtteranceWindows {
    pub low: Vec<Vec<f32>>,
    pub high: Vec<Vec<f32>>,
    pub rows: usize,
    pub cols: usize,
}

/// Trim, transform, and window one utterance without running the replay
/// gate or any model. This is the training-time counterpart of
/// `Pipeline::process`; `max_windows` 0 keeps every window.
pub fn extract_windows(
    audio: &AudioBuffer,
    stft_cfg: &StftConfig,
    align: &AlignConfig,
    band: (f64, f64),
    target_rate: u32,
    max_windows: usize,
) -> Result<UtteranceWindows, PipelineError> {
    align.validate()?;
    let trimmed = remove_silence(audio, &SilenceParams::for_rate(audio.sample_rate))?;
    let spec = stft(&trimmed, stft_cfg)?;
    let resample = ResampleSpec::new(trimmed.sample_rate, target_rate)?;
    if resample.factor() != align.alpha {
        return Err(PipelineError::InvalidConfig(format!(
            "downsampling by {} but windows align assuming {}",
            resample.factor(),
            align.alpha
        )));
    }
    let low = downsample(&trimmed, &resample)?;
    let high = spec.crop_band(band.0, band.1)?;
    let pairs = align_windows(low.len(), high.cols(), align)?;
    let picked = spaced_subset(pairs.len(), max_windows);

    let l_win = align.low_window;
    let h_win = align.high_window();
    let rows = high.rows();
    let mut out = UtteranceWindows {
        low: Vec::with_capacity(picked.len()),
        high: Vec::with_capacity(picked.len()),
        rows,
        cols: h_win,
    };
    for i in picked {
        let pair = pairs[i];
        out.low
            .push(low.samples[pair.low_start..pair.low_start + l_win].to_vec());
        let mut patch = Vec::with_capacity(rows * h_win);
        for r in 0..rows {
            patch.extend(
                high.row(r)[pair.high_start..pair.high_start + h_win]
                    .iter()
                    .map(|&v| v as f32),
            );
        }
        out.high.push(patch);
    }
    Ok(out)
}

/// Replay-gate report for one utterance, without touching any model: trim
/// silence, take the wideband spectrogram, and score it.
pub fn liveness_report(
    audio: &AudioBuffer,
    stft_cfg: &StftConfig,
    liveness_cfg: &LivenessConfig,
) -> Result<LivenessReport, PipelineError> {
    let trimmed = remove_silence(audio, &SilenceParams::for_rate(audio.sample_rate))?;
    let spec = stft(&trimmed, stft_cfg)?;
    Ok(liveness::analyze(&spec, liveness_cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{apply_device, gen_genuine, DeviceModel, SpeakerProfile};

    fn test_model_config() -> ModelConfig {
        ModelConfig {
            low_window: 1152,
            low_rate: 16_000.0,
            sinc_filters: 8,
            sinc_len: 101,
            conv_channels: 10,
            conv_len: 5,
            pool: 3,
            hf_rows: 426,
            hf_cols: 27,
            hf_ch_early: 6,
            hf_ch_late: 6,
            hf_proj_dim: 16,
            embed_dim: 24,
        }
    }

    // Pipeline::new checks consistency against the default alignment, which
    // the shrunken test model intentionally fails; build the struct directly
    // with a matching alignment instead.
    fn build_test_pipeline() -> Pipeline {
        let cfg = test_model_config();
        let model = TwoStreamModel::<f32>::new(&cfg, 7).unwrap();
        let align = AlignConfig {
            low_window: 1152,
            low_hop: 160,
            alpha: 12,
            stft_hop: 512,
        };
        let p = Pipeline {
            model,
            checkpoint_hash: "testhash".into(),
            stft: StftConfig::default(),
            liveness: LivenessConfig::default(),
            align,
            band: (8_000.0, 48_000.0),
            target_rate: 16_000,
            batch: 16,
            max_windows: 0,
        };
        p.check_consistency().unwrap();
        p
    }

    fn genuine_utterance(speaker: usize, utterance: u64, secs: f64) -> AudioBuffer {
        let profile = SpeakerProfile::for_speaker(99, speaker);
        let seed = crate::rng::SplitMix64::stream(99, &[2, speaker as u64, utterance]).next_u64();
        gen_genuine(&profile.with_seed(seed), secs, 192_000)
    }

    #[test]
    fn high_window_spans_seventy_five_columns_at_production_settings() {
        let cfg = AlignConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.high_window(), 75);
    }

    #[test]
    fn high_starts_round_to_nearest_column() {
        let cfg = AlignConfig::default();
        // hop ratio is 160*12/512 = 3.75
        assert_eq!(cfg.high_start(0), 0);
        assert_eq!(cfg.high_start(1), 4);
        assert_eq!(cfg.high_start(2), 8);
        assert_eq!(cfg.high_start(3), 11);
        assert_eq!(cfg.high_start(4), 15);
        assert_eq!(cfg.high_start(129), 484);
    }

    #[test]
    fn alignment_rejects_windows_not_divisible_by_the_hop() {
        let cfg = AlignConfig {
            low_window: 800,
            ..AlignConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(PipelineError::InvalidConfig(_))
        ));
    }

    #[test]
    fn window_count_for_a_standard_utterance() {
        // 1.5 s at 192 kHz trims to 288000 samples, 24000 after /12, and a
        // 2048/512 analysis yields 559 columns. Window 130 would need
        // column 488 + 75 > 559, so 130 pairs fit.
        let pairs = align_windows(24_000, 559, &AlignConfig::default()).unwrap();
        assert_eq!(pairs.len(), 130);
        assert_eq!(pairs[0], WindowPair { low_start: 0, high_start: 0 });
        assert_eq!(
            pairs[129],
            WindowPair {
                low_start: 129 * 160,
                high_start: 484
            }
        );
    }

    #[test]
    fn too_short_input_is_reported_with_both_requirements() {
        let err = align_windows(100, 10, &AlignConfig::default()).unwrap_err();
        match err {
            PipelineError::InputTooShort {
                low,
                low_needed,
                hf_cols,
                hf_needed,
            } => {
                assert_eq!(low, 100);
                assert_eq!(low_needed, 3200);
                assert_eq!(hf_cols, 10);
                assert_eq!(hf_needed, 75);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cosine_of_known_vectors() {
        let a = [1.0f32, 2.0, 2.0];
        let b = [2.0f32, 1.0, 2.0];
        let got = cosine_similarity(&a, &b).unwrap();
        assert!((got - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_one_for_identical_and_zero_for_orthogonal() {
        let a = [0.3f32, -0.7, 0.1];
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let x = [1.0f32, 0.0];
        let y = [0.0f32, 1.0];
        assert_eq!(cosine_similarity(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn cosine_against_a_zero_vector_is_zero_not_nan() {
        let a = [0.0f32, 0.0];
        let b = [3.0f32, 4.0];
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_rejects_mismatched_lengths() {
        let err = cosine_similarity(&[1.0], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::LengthMismatch { a: 1, b: 2 }
        ));
    }

    #[test]
    fn store_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        let mut store = EnrollmentStore::new(3, "abc123".into());
        store.add("bob", vec![1.0, 2.0, 3.0]).unwrap();
        store.add("alice", vec![-1.0, 0.5, 0.0]).unwrap();
        store.add("alice", vec![0.1, 0.2, 0.3]).unwrap();
        store.save(&path).unwrap();
        let loaded = EnrollmentStore::load(&path).unwrap();
        assert_eq!(loaded, store);
        let names: Vec<&str> = loaded.speakers().collect();
        assert_eq!(names, ["alice", "bob"]);
    }

    #[test]
    fn store_rejects_wrong_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        let mut store = EnrollmentStore::new(2, "h".into());
        store.add("s", vec![1.0, 2.0]).unwrap();
        store.save(&path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            EnrollmentStore::load(&path),
            Err(PipelineError::BadStore(_))
        ));

        bytes[0] = b'S';
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            EnrollmentStore::load(&path),
            Err(PipelineError::BadStore(_))
        ));
    }

    #[test]
    fn store_rejects_embeddings_of_the_wrong_dimension() {
        let mut store = EnrollmentStore::new(4, "h".into());
        let err = store.add("s", vec![1.0; 3]).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::DimensionMismatch { expected: 4, got: 3 }
        ));
    }

    #[test]
    fn genuine_audio_comes_back_live_with_an_embedding() {
        let mut p = build_test_pipeline();
        let audio = genuine_utterance(1, 0, 0.4);
        match p.process(&audio).unwrap() {
            UtteranceOutcome::Live {
                embedding, windows, ..
            } => {
                assert_eq!(embedding.len(), 24);
                assert!(windows > 0);
                assert!(embedding.iter().all(|v| v.is_finite()));
            }
            UtteranceOutcome::Spoof { report } => {
                panic!("genuine audio gated out: r1={} r2={}", report.r1, report.r2)
            }
        }
    }

    #[test]
    fn replayed_audio_is_gated_before_the_model_runs() {
        let mut p = build_test_pipeline();
        let audio = genuine_utterance(2, 0, 0.4);
        let device = DeviceModel::commercial(22_000.0).unwrap();
        let replayed = apply_device(&audio, &device);
        match p.process(&replayed).unwrap() {
            UtteranceOutcome::Spoof { report } => {
                assert_eq!(report.verdict, Verdict::Spoof);
            }
            UtteranceOutcome::Live { .. } => panic!("replayed audio passed the gate"),
        }
    }

    #[test]
    fn process_rejects_the_wrong_capture_rate() {
        let mut p = build_test_pipeline();
        let audio = AudioBuffer::new(vec![0.1; 96_000], 96_000);
        assert!(matches!(
            p.process(&audio),
            Err(PipelineError::RateMismatch {
                rate: 96_000,
                expected: 192_000
            })
        ));
    }

    #[test]
    fn processing_is_deterministic_for_the_same_input() {
        let mut p = build_test_pipeline();
        let audio = genuine_utterance(3, 0, 0.4);
        let a = match p.process(&audio).unwrap() {
            UtteranceOutcome::Live { embedding, .. } => embedding,
            _ => panic!("expected live"),
        };
        let b = match p.process(&audio).unwrap() {
            UtteranceOutcome::Live { embedding, .. } => embedding,
            _ => panic!("expected live"),
        };
        assert_eq!(a, b);
    }

    #[test]
    fn enrollment_with_a_spoofed_utterance_writes_nothing() {
        let mut p = build_test_pipeline();
        let mut store = EnrollmentStore::new(24, "testhash".into());
        let good = genuine_utterance(4, 0, 0.4);
        let device = DeviceModel::commercial(22_000.0).unwrap();
        let bad = apply_device(&genuine_utterance(4, 1, 0.4), &device);
        let err = p.enroll(&mut store, "mallory", &[good, bad]).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::LivenessRejected { index: 1, .. }
        ));
        assert!(store.is_empty());
    }

    #[test]
    fn enrollment_appends_every_live_utterance() {
        let mut p = build_test_pipeline();
        let mut store = EnrollmentStore::new(24, "testhash".into());
        let utts = [genuine_utterance(5, 0, 0.4), genuine_utterance(5, 1, 0.4)];
        let n = p.enroll(&mut store, "carol", &utts).unwrap();
        assert_eq!(n, 2);
        assert_eq!(store.embeddings("carol").unwrap().len(), 2);
    }

    #[test]
    fn verifying_an_enrolled_utterance_against_itself_scores_one() {
        let mut p = build_test_pipeline();
        let mut store = EnrollmentStore::new(24, "testhash".into());
        let audio = genuine_utterance(6, 0, 0.4);
        p.enroll(&mut store, "dave", std::slice::from_ref(&audio))
            .unwrap();
        let decision = p.verify(&store, "dave", &audio, 0.9).unwrap();
        assert!(decision.accepted);
        assert!((decision.similarity - 1.0).abs() < 1e-6);
        assert_eq!(decision.threshold, 0.9);
    }

    #[test]
    fn verify_decision_accept_flag_matches_the_threshold() {
        let mut p = build_test_pipeline();
        let mut store = EnrollmentStore::new(24, "testhash".into());
        let audio = genuine_utterance(7, 0, 0.4);
        p.enroll(&mut store, "erin", std::slice::from_ref(&audio))
            .unwrap();
        let decision = p.verify(&store, "erin", &audio, 1.5).unwrap();
        assert!(!decision.accepted);
        assert!(decision.similarity < decision.threshold);
    }

    #[test]
    fn verifying_an_unknown_speaker_fails() {
        let mut p = build_test_pipeline();
        let store = EnrollmentStore::new(24, "testhash".into());
        let audio = genuine_utterance(8, 0, 0.4);
        assert!(matches!(
            p.verify(&store, "nobody", &audio, 0.5),
            Err(PipelineError::UnknownSpeaker(_))
        ));
    }

    #[test]
    fn verifying_a_replayed_query_is_an_error_not_a_low_score() {
        let mut p = build_test_pipeline();
        let mut store = EnrollmentStore::new(24, "testhash".into());
        let audio = genuine_utterance(9, 0, 0.4);
        p.enroll(&mut store, "frank", std::slice::from_ref(&audio))
            .unwrap();
        let device = DeviceModel::commercial(22_000.0).unwrap();
        let replayed = apply_device(&genuine_utterance(9, 1, 0.4), &device);
        assert!(matches!(
            p.verify(&store, "frank", &replayed, 0.5),
            Err(PipelineError::SpoofDetected { .. })
        ));
    }

    #[test]
    fn stores_from_a_different_checkpoint_are_refused() {
        let mut p = build_test_pipeline();
        let mut store = EnrollmentStore::new(24, "otherhash".into());
        let audio = genuine_utterance(10, 0, 0.4);
        let err = p
            .enroll(&mut store, "gina", std::slice::from_ref(&audio))
            .unwrap_err();
        assert!(matches!(err, PipelineError::HashMismatch { .. }));
        assert!(matches!(
            p.verify(&store, "gina", &audio, 0.5),
            Err(PipelineError::HashMismatch { .. })
        ));
    }

    #[test]
    fn liveness_report_matches_the_gate_inside_process() {
        let audio = genuine_utterance(11, 0, 0.4);
        let report =
            liveness_report(&audio, &StftConfig::default(), &LivenessConfig::default()).unwrap();
        assert_eq!(report.verdict, Verdict::Live);
        assert!(report.r1.is_finite() && report.r1 > 0.0);
        assert!(report.r2.is_finite() && report.r2 > 0.0);
    }

    #[test]
    fn batch_size_does_not_change_the_embedding() {
        let audio = genuine_utterance(12, 0, 0.5);
        let mut p1 = build_test_pipeline();
        p1.batch = 1;
        let mut p2 = build_test_pipeline();
        p2.batch = 64;
        let e1 = match p1.process(&audio).unwrap() {
            UtteranceOutcome::Live { embedding, .. } => embedding,
            _ => panic!("expected live"),
        };
        let e2 = match p2.process(&audio).unwrap() {
            UtteranceOutcome::Live { embedding, .. } => embedding,
            _ => panic!("expected live"),
        };
        assert_eq!(e1, e2);
    }

    #[test]
    fn spaced_subset_covers_everything_when_uncapped() {
        assert_eq!(spaced_subset(4, 0), [0, 1, 2, 3]);
        assert_eq!(spaced_subset(3, 5), [0, 1, 2]);
    }

    #[test]
    fn spaced_subset_picks_strictly_increasing_spread_indices() {
        let picked = spaced_subset(130, 8);
        assert_eq!(picked, [0, 16, 32, 48, 65, 81, 97, 113]);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn window_cap_changes_the_count_but_stays_deterministic() {
        let audio = genuine_utterance(13, 0, 0.5);
        let mut p = build_test_pipeline();
        p.max_windows = 3;
        let (e1, w1) = match p.process(&audio).unwrap() {
            UtteranceOutcome::Live {
                embedding, windows, ..
            } => (embedding, windows),
            _ => panic!("expected live"),
        };
        assert_eq!(w1, 3);
        let (e2, w2) = match p.process(&audio).unwrap() {
            UtteranceOutcome::Live {
                embedding, windows, ..
            } => (embedding, windows),
            _ => panic!("expected live"),
        };
        assert_eq!(w2, 3);
        assert_eq!(e1, e2);
    }

    #[test]
    fn extracted_windows_match_the_geometry_the_pipeline_feeds_the_model() {
        let audio = genuine_utterance(14, 0, 0.4);
        let align = AlignConfig {
            low_window: 1152,
            low_hop: 160,
            alpha: 12,
            stft_hop: 512,
        };
        let windows = extract_windows(
            &audio,
            &StftConfig::default(),
            &align,
            (8_000.0, 48_000.0),
            16_000,
            0,
        )
        .unwrap();
        assert!(!windows.low.is_empty());
        assert_eq!(windows.low.len(), windows.high.len());
        assert_eq!(windows.rows, 426);
        assert_eq!(windows.cols, 27);
        assert!(windows.low.iter().all(|w| w.len() == 1152));
        assert!(windows.high.iter().all(|w| w.len() == 426 * 27));

        // same count the pipeline reports for the same input
        let mut p = build_test_pipeline();
        match p.process(&audio).unwrap() {
            UtteranceOutcome::Live { windows: n, .. } => assert_eq!(n, windows.low.len()),
            _ => panic!("expected live"),
        }
    }

    #[test]
    fn extracted_window_cap_takes_a_spread_subset() {
        let audio = genuine_utterance(14, 1, 0.4);
        let align = AlignConfig {
            low_window: 1152,
            low_hop: 160,
            alpha: 12,
            stft_hop: 512,
        };
        let capped = extract_windows(
            &audio,
            &StftConfig::default(),
            &align,
            (8_000.0, 48_000.0),
            16_000,
            4,
        )
        .unwrap();
        assert_eq!(capped.low.len(), 4);
    }

    #[test]
    fn new_rejects_a_model_whose_window_disagrees_with_the_alignment() {
        let cfg = test_model_config();
        let model = TwoStreamModel::<f32>::new(&cfg, 7).unwrap();
        // default alignment wants 3200-sample windows, the model wants 1152
        assert!(matches!(
            Pipeline::new(model, "h".into()),
            Err(PipelineError::InvalidConfig(_))
        ));
    }
}

//! Mono WAV input and output.
//!
//! Only the subset of RIFF/WAVE this toolkit actually records and consumes
//! is supported: single-channel PCM-16 or IEEE float-32, little-endian.
//! Anything else (stereo, 24-bit, extensible headers, compressed codecs)
//! is rejected with [`AudioError::UnsupportedFormat`] rather than guessed at.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

/// A mono audio signal. Samples are nominally in [-1, 1]; PCM-16 input is
/// normalized by 1/32768 on read.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be nonzero");
        AudioBuffer { samples, sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// On-disk sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed wav: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// Reads a mono WAV file. PCM-16 samples are scaled by 1/32768; float-32
/// samples are taken verbatim. Non-finite float samples are rejected.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            AudioError::NotFound(path.to_path_buf())
        } else {
            AudioError::Io(e)
        }
    })?;
    let mut r = BufReader::new(file);

    let mut four = [0u8; 4];
    r.read_exact(&mut four)?;
    if &four != b"RIFF" {
        return Err(AudioError::Malformed("missing RIFF tag".into()));
    }
    let _riff_len = r.read_u32::<LittleEndian>()?;
    r.read_exact(&mut four)?;
    if &four != b"WAVE" {
        return Err(AudioError::Malformed("missing WAVE tag".into()));
    }

    let mut fmt: Option<(u16, u32, u16)> = None; // (format, rate, bits)
    loop {
        if r.read_exact(&mut four).is_err() {
            return Err(AudioError::Malformed("no data chunk".into()));
        }
        let chunk_len = r.read_u32::<LittleEndian>()?;
        match &four {
            b"fmt " => {
                if chunk_len < 16 {
                    return Err(AudioError::Malformed("fmt chunk too short".into()));
                }
                let format = r.read_u16::<LittleEndian>()?;
                let channels = r.read_u16::<LittleEndian>()?;
                let rate = r.read_u32::<LittleEndian>()?;
                let _byte_rate = r.read_u32::<LittleEndian>()?;
                let _block_align = r.read_u16::<LittleEndian>()?;
                let bits = r.read_u16::<LittleEndian>()?;
                skip(&mut r, padded(chunk_len) as i64 - 16)?;
                if channels != 1 {
                    return Err(AudioError::UnsupportedFormat(format!(
                        "{channels} channels (only mono is supported)"
                    )));
                }
                if rate == 0 {
                    return Err(AudioError::Malformed("zero sample rate".into()));
                }
                match (format, bits) {
                    (FORMAT_PCM, 16) | (FORMAT_IEEE_FLOAT, 32) => {}
                    _ => {
                        return Err(AudioError::UnsupportedFormat(format!(
                            "format tag {format} at {bits} bits"
                        )))
                    }
                }
                fmt = Some((format, rate, bits));
            }
            b"data" => {
                let (format, rate, _bits) = fmt.ok_or_else(|| {
                    AudioError::Malformed("data chunk before fmt chunk".into())
                })?;
                let n = chunk_len as usize;
                let samples = match format {
                    FORMAT_PCM => {
                        if n % 2 != 0 {
                            return Err(AudioError::Malformed("odd PCM-16 data length".into()));
                        }
                        let mut out = Vec::with_capacity(n / 2);
                        for _ in 0..n / 2 {
                            let v = r.read_i16::<LittleEndian>()?;
                            out.push(v as f32 / 32768.0);
                        }
                        out
                    }
                    FORMAT_IEEE_FLOAT => {
                        if n % 4 != 0 {
                            return Err(AudioError::Malformed("odd float-32 data length".into()));
                        }
                        let mut out = Vec::with_capacity(n / 4);
                        for _ in 0..n / 4 {
                            let v = r.read_f32::<LittleEndian>()?;
                            if !v.is_finite() {
                                return Err(AudioError::Malformed(
                                    "non-finite float sample".into(),
                                ));
                            }
                            out.push(v);
                        }
                        out
                    }
                    _ => unreachable!("format validated above"),
                };
                return Ok(AudioBuffer::new(samples, rate));
            }
            _ => {
                // LIST, fact, cue and friends: skip, honoring word alignment.
                skip(&mut r, padded(chunk_len) as i64)?;
            }
        }
    }
}

/// Writes a mono WAV file. PCM-16 output clamps to [-1, 1] and rounds to the
/// nearest step; float-32 output stores the samples bit-exactly.
pub fn write_wav(
    buf: &AudioBuffer,
    path: impl AsRef<Path>,
    format: SampleFormat,
) -> Result<(), AudioError> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);

    let (format_tag, bits): (u16, u16) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16),
        SampleFormat::Float32 => (FORMAT_IEEE_FLOAT, 32),
    };
    let bytes_per_sample = u32::from(bits / 8);
    let data_len = buf.samples.len() as u32 * bytes_per_sample;

    w.write_all(b"RIFF")?;
    w.write_u32::<LittleEndian>(36 + data_len)?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_u32::<LittleEndian>(16)?;
    w.write_u16::<LittleEndian>(format_tag)?;
    w.write_u16::<LittleEndian>(1)?; // channels
    w.write_u32::<LittleEndian>(buf.sample_rate)?;
    w.write_u32::<LittleEndian>(buf.sample_rate * bytes_per_sample)?;
    w.write_u16::<LittleEndian>(bytes_per_sample as u16)?;
    w.write_u16::<LittleEndian>(bits)?;
    w.write_all(b"data")?;
    w.write_u32::<LittleEndian>(data_len)?;

    match format {
        SampleFormat::Pcm16 => {
            for &s in &buf.samples {
                let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                w.write_i16::<LittleEndian>(v)?;
            }
        }
        SampleFormat::Float32 => {
            for &s in &buf.samples {
                w.write_f32::<LittleEndian>(s)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// RIFF chunks are word-aligned: odd payloads carry one pad byte.
fn padded(len: u32) -> u32 {
    len + (len & 1)
}

fn skip<R: Read + Seek>(r: &mut R, n: i64) -> Result<(), AudioError> {
    if n > 0 {
        r.seek(SeekFrom::Current(n))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("supervoice-audio-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn pcm16_round_trip_within_one_step() {
        let buf = AudioBuffer::new(vec![0.0, 0.25, -0.5, 0.999, -1.0], 16_000);
        let p = tmp("pcm16.wav");
        write_wav(&buf, &p, SampleFormat::Pcm16).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.sample_rate, 16_000);
        assert_eq!(back.len(), buf.len());
        for (a, b) in buf.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
        }
    }

    #[test]
    fn pcm16_rewrite_is_byte_identical() {
        // Values produced by our own reader are exact multiples of 1/32768,
        // so a second encode round-trips without any drift.
        let buf = AudioBuffer::new(vec![0.1, -0.7, 0.3333, 0.9], 192_000);
        let p1 = tmp("pcm16_a.wav");
        let p2 = tmp("pcm16_b.wav");
        write_wav(&buf, &p1, SampleFormat::Pcm16).unwrap();
        let once = read_wav(&p1).unwrap();
        write_wav(&once, &p2, SampleFormat::Pcm16).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn float32_round_trip_is_bit_exact() {
        let buf = AudioBuffer::new(vec![0.1, -0.2, 1.5, -3.25e-5, 0.0], 192_000);
        let p = tmp("f32.wav");
        write_wav(&buf, &p, SampleFormat::Float32).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.sample_rate, 192_000);
        for (a, b) in buf.samples.iter().zip(&back.samples) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        // Hand-build a file with a LIST chunk between fmt and data.
        let p = tmp("list.wav");
        let mut bytes = Vec::new();
        bytes.extend(b"RIFF");
        bytes.extend(&0u32.to_le_bytes()); // size not checked by reader
        bytes.extend(b"WAVE");
        bytes.extend(b"fmt ");
        bytes.extend(&16u32.to_le_bytes());
        bytes.extend(&1u16.to_le_bytes());
        bytes.extend(&1u16.to_le_bytes());
        bytes.extend(&8000u32.to_le_bytes());
        bytes.extend(&16000u32.to_le_bytes());
        bytes.extend(&2u16.to_le_bytes());
        bytes.extend(&16u16.to_le_bytes());
        bytes.extend(b"LIST");
        bytes.extend(&3u32.to_le_bytes());
        bytes.extend(&[1, 2, 3, 0]); // odd payload plus pad byte
        bytes.extend(b"data");
        bytes.extend(&4u32.to_le_bytes());
        bytes.extend(&1000i16.to_le_bytes());
        bytes.extend(&(-1000i16).to_le_bytes());
        std::fs::write(&p, bytes).unwrap();

        let buf = read_wav(&p).unwrap();
        assert_eq!(buf.sample_rate, 8000);
        assert_eq!(buf.len(), 2);
        assert!((buf.samples[0] - 1000.0 / 32768.0).abs() < 1e-9);
    }

    #[test]
    fn stereo_and_exotic_formats_are_rejected() {
        let p = tmp("stereo.wav");
        let mut bytes = Vec::new();
        bytes.extend(b"RIFF");
        bytes.extend(&0u32.to_le_bytes());
        bytes.extend(b"WAVE");
        bytes.extend(b"fmt ");
        bytes.extend(&16u32.to_le_bytes());
        bytes.extend(&1u16.to_le_bytes());
        bytes.extend(&2u16.to_le_bytes()); // stereo
        bytes.extend(&44100u32.to_le_bytes());
        bytes.extend(&176400u32.to_le_bytes());
        bytes.extend(&4u16.to_le_bytes());
        bytes.extend(&16u16.to_le_bytes());
        bytes.extend(b"data");
        bytes.extend(&0u32.to_le_bytes());
        std::fs::write(&p, bytes).unwrap();
        match read_wav(&p) {
            Err(AudioError::UnsupportedFormat(msg)) => assert!(msg.contains("2 channels")),
            other => panic!("expected UnsupportedFormat, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_reports_not_found() {
        match read_wav("/nonexistent/supervoice-missing.wav") {
            Err(AudioError::NotFound(p)) => {
                assert!(p.to_string_lossy().contains("supervoice-missing"))
            }
            other => panic!("expected NotFound, got {other:?}"),
        }
    }
}

//! Embedding-model checkpoints.
//!
//! A checkpoint stores every tensor of a `TwoStreamModel` (the training head
//! is deliberately excluded) as named little-endian f32 arrays in traversal
//! order. Writing the same model twice produces byte-identical files, which
//! lets callers bind enrollment data to an exact set of weights via the
//! file's SHA-256 digest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::model::{ModelConfig, TwoStreamModel};
use super::NeuralError;

const MAGIC: &[u8; 4] = b"SVCK";
const VERSION: u32 = 1;
/// Upper bounds used to reject nonsense before allocating.
const MAX_NAME_LEN: u32 = 4096;
const MAX_NDIM: u32 = 8;
const MAX_ELEMENTS: u64 = 1 << 30;

pub fn save_checkpoint(model: &mut TwoStreamModel<f32>, path: &Path) -> Result<(), NeuralError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let params = model.params_mut();
    w.write_u32::<LittleEndian>(params.len() as u32)?;
    for (name, p) in params {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u32::<LittleEndian>(p.value.shape().len() as u32)?;
        for &d in p.value.shape() {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in p.value.data() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn corrupt_on_eof(e: std::io::Error, what: &str) -> NeuralError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        NeuralError::Corrupt(format!("file ends inside {what}"))
    } else {
        NeuralError::Io(e)
    }
}

pub fn load_checkpoint(path: &Path, cfg: &ModelConfig) -> Result<TwoStreamModel<f32>, NeuralError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| corrupt_on_eof(e, "the header"))?;
    if &magic != MAGIC {
        return Err(NeuralError::Corrupt("bad magic bytes".into()));
    }
    let version = r
        .read_u32::<LittleEndian>()
        .map_err(|e| corrupt_on_eof(e, "the header"))?;
    if version != VERSION {
        return Err(NeuralError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let count = r
        .read_u32::<LittleEndian>()
        .map_err(|e| corrupt_on_eof(e, "the header"))?;

    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r
            .read_u32::<LittleEndian>()
            .map_err(|e| corrupt_on_eof(e, "a tensor name"))?;
        if name_len == 0 || name_len > MAX_NAME_LEN {
            return Err(NeuralError::Corrupt(format!(
                "implausible tensor name length {name_len}"
            )));
        }
        let mut name_bytes = vec![0u8; name_len as usize];
        r.read_exact(&mut name_bytes)
            .map_err(|e| corrupt_on_eof(e, "a tensor name"))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| NeuralError::Corrupt("tensor name is not UTF-8".into()))?;

        let ndim = r
            .read_u32::<LittleEndian>()
            .map_err(|e| corrupt_on_eof(e, "a tensor header"))?;
        if ndim == 0 || ndim > MAX_NDIM {
            return Err(NeuralError::Corrupt(format!("implausible rank {ndim}")));
        }
        let mut dims = Vec::with_capacity(ndim as usize);
        let mut elements = 1u64;
        for _ in 0..ndim {
            let d = r
                .read_u32::<LittleEndian>()
                .map_err(|e| corrupt_on_eof(e, "a tensor header"))? as u64;
            elements = elements.saturating_mul(d);
            dims.push(d as usize);
        }
        if elements == 0 || elements > MAX_ELEMENTS {
            return Err(NeuralError::Corrupt(format!(
                "implausible element count {elements} for {name}"
            )));
        }
        let mut data = vec![0f32; elements as usize];
        r.read_f32_into::<LittleEndian>(&mut data)
            .map_err(|e| corrupt_on_eof(e, &format!("the data of {name}")))?;
        entries.push((name, dims, data));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(NeuralError::Corrupt("trailing bytes after the last tensor".into()));
    }

    let mut model = TwoStreamModel::new(cfg, 0)?;
    {
        let params = model.params_mut();
        if params.len() != entries.len() {
            return Err(NeuralError::Incompatible(format!(
                "checkpoint has {} tensors, model wants {}",
                entries.len(),
                params.len()
            )));
        }
        for ((name, p), (e_name, e_dims, e_data)) in params.into_iter().zip(entries) {
            if name != e_name {
                return Err(NeuralError::Incompatible(format!(
                    "tensor order differs: expected {name}, found {e_name}"
                )));
            }
            if p.value.shape() != e_dims.as_slice() {
                return Err(NeuralError::Incompatible(format!(
                    "{name}: checkpoint shape {:?} does not match model shape {:?}",
                    e_dims,
                    p.value.shape()
                )));
            }
            p.value.data_mut().copy_from_slice(&e_data);
        }
    }
    Ok(model)
}

/// Hex SHA-256 digest of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String, NeuralError> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

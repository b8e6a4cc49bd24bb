//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! magic "MOSNETCK" | version u32 | config_len u32 | config text (key=value)
//! n_params u32 | per parameter: name_len u32, name, ndim u32, dims u32 x ndim,
//!                               values f32 x prod(dims)
//! checksum u64 (FNV-1a of every preceding byte)
//! ```

use std::fs;
use std::path::Path;

use crate::models::{build_model, Model, ModelConfig, ModelError};
use crate::nn::{Module, Real, Tensor};
use crate::rng::fnv1a64;

pub const MAGIC: &[u8; 8] = b"MOSNETCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint checksum mismatch (file truncated or corrupted)")]
    Checksum,
    #[error("checkpoint format version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint holds a {found} model, expected {expected}")]
    ArchitectureMismatch { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("checkpoint field fits u32").to_le_bytes());
}

pub fn encode_checkpoint<F: Real>(model: &Model<F>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let text = model.config().to_text();
    put_u32(&mut out, text.len());
    out.extend_from_slice(text.as_bytes());
    let params = model.params();
    put_u32(&mut out, params.len());
    for (name, p) in params {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, p.shape().len());
        for &d in p.shape() {
            put_u32(&mut out, d);
        }
        for &v in p.value.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn save_checkpoint<F: Real>(model: &Model<F>, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Malformed(format!("unexpected end at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Malformed("non-UTF-8 text".into()))
    }
}

pub fn decode_checkpoint<F: Real>(bytes: &[u8]) -> Result<Model<F>, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 12 {
        return Err(CheckpointError::Checksum);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 8);
    if fnv1a64(body) != u64::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(CheckpointError::Checksum);
    }
    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let config = ModelConfig::from_text(&r.string()?)?;
    // Seed is irrelevant: every parameter is overwritten below.
    let mut model = build_model::<F>(&config, 0)?;
    let expected: Vec<(String, Vec<usize>)> = model
        .params()
        .into_iter()
        .map(|(n, p)| (n, p.shape().to_vec()))
        .collect();
    let n = r.u32()?;
    if n != expected.len() {
        return Err(CheckpointError::Malformed(format!(
            "{n} parameters stored, config implies {}",
            expected.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for (want_name, want_shape) in &expected {
        let name = r.string()?;
        let ndim = r.u32()?;
        let shape = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        if &name != want_name || &shape != want_shape {
            return Err(CheckpointError::Malformed(format!(
                "parameter '{name}' {shape:?} where '{want_name}' {want_shape:?} was expected"
            )));
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| F::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        values.push(Tensor::from_vec(&shape, data).map_err(ModelError::from)?);
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Malformed("trailing bytes after parameters".into()));
    }
    for (p, v) in model.params_mut().into_iter().zip(values) {
        p.value = v;
    }
    Ok(model)
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<Model<F>, CheckpointError> {
    decode_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint, requiring it to hold exactly the configuration of
/// `expected`.
pub fn load_checkpoint_as<F: Real>(path: &Path, expected: &ModelConfig) -> Result<Model<F>, CheckpointError> {
    let model = load_checkpoint::<F>(path)?;
    if model.config() != expected {
        return Err(CheckpointError::ArchitectureMismatch {
            expected: expected.to_text().trim_end().replace('\n', " "),
            found: model.config().to_text().trim_end().replace('\n', " "),
        });
    }
    Ok(model)
}

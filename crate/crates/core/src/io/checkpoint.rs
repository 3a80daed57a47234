use super::files::write_atomic;
use crate::error::{GilError, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::Tensor;
use crate::rng::sha256_hex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: u64,
    dtype: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    model: ModelConfig,
    tensors: BTreeMap<String, TensorEntry>,
    payload_sha256: String,
}

/// `u32 LE header length | JSON header | f32 LE payload`.
///
/// Tensors are laid out in header key order; values are rounded to the
/// nearest `f32`.
pub fn encode_checkpoint(params: &ModelParams) -> Result<Vec<u8>> {
    if !params.is_finite() {
        return Err(GilError::NonFinite("checkpoint"));
    }
    let named: BTreeMap<&str, &Tensor> = params.named().collect();
    let mut payload = Vec::with_capacity(params.num_values() * 4);
    let mut tensors = BTreeMap::new();
    for (name, t) in named {
        let entry = TensorEntry { shape: t.shape().to_vec(), offset: payload.len() as u64, dtype: "f32".into() };
        tensors.insert(name.to_owned(), entry);
        for &v in t.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let header = Header {
        format_version: CHECKPOINT_VERSION,
        model: *params.config(),
        tensors,
        payload_sha256: sha256_hex(&payload),
    };
    let json = serde_json::to_vec(&header)?;
    let len = u32::try_from(json.len()).map_err(|_| GilError::Checkpoint("header too large".into()))?;
    let mut out = Vec::with_capacity(4 + json.len() + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let bad = |m: String| GilError::Checkpoint(m);
    let len_bytes: [u8; 4] =
        bytes.get(..4).ok_or_else(|| bad("file shorter than its length prefix".into()))?.try_into().expect("4 bytes");
    let len = u32::from_le_bytes(len_bytes) as usize;
    let json = bytes.get(4..4 + len).ok_or_else(|| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(bad(format!("format version {} (expected {CHECKPOINT_VERSION})", header.format_version)));
    }
    let payload = &bytes[4 + len..];
    if sha256_hex(payload) != header.payload_sha256 {
        return Err(bad("payload checksum mismatch".into()));
    }
    let mut expected = 0u64;
    let mut named = Vec::with_capacity(header.tensors.len());
    for (name, e) in header.tensors {
        if e.dtype != "f32" {
            return Err(bad(format!("tensor `{name}` has dtype {}", e.dtype)));
        }
        if e.offset != expected {
            return Err(bad(format!("tensor `{name}` at offset {} (expected {expected})", e.offset)));
        }
        let count: usize = e.shape.iter().product();
        let end = e.offset as usize + 4 * count;
        let raw = payload.get(e.offset as usize..end).ok_or_else(|| bad(format!("payload truncated in `{name}`")))?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        named.push((name, Tensor::new(e.shape, data).map_err(|err| bad(err.to_string()))?));
        expected = end as u64;
    }
    if expected as usize != payload.len() {
        return Err(bad(format!("{} trailing payload bytes", payload.len() - expected as usize)));
    }
    ModelParams::from_named(header.model, named)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    write_atomic(path, &encode_checkpoint(params)?)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&fs::read(path)?)
}

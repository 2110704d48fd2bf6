//! Binary model container shared by the denoiser and the classifier.
//!
//! Layout: the 8-byte magic `EEGDIF01`, a little-endian `u64` byte length,
//! that many bytes of UTF-8 JSON metadata, then the parameters as
//! little-endian `f32` in the model's canonical order. The metadata always
//! carries `kind`, `format_version` and `param_count`.

use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"EEGDIF01";
pub const FORMAT_VERSION: u64 = 1;

pub fn encode(kind: &str, mut metadata: Value, params: &[f32]) -> Result<Vec<u8>> {
    let obj = metadata
        .as_object_mut()
        .ok_or_else(|| Error::Checkpoint("metadata must be a JSON object".into()))?;
    obj.insert("kind".into(), Value::from(kind));
    obj.insert("format_version".into(), Value::from(FORMAT_VERSION));
    obj.insert("param_count".into(), Value::from(params.len() as u64));
    let json = serde_json::to_vec(&metadata)?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

/// Validates the container and returns `(metadata, parameters)`.
pub fn decode(bytes: &[u8], expected_kind: &str) -> Result<(Value, Vec<f32>)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic: not a model checkpoint".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let json_end = 16usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("metadata length exceeds file size".into()))?;
    let meta: Value = serde_json::from_slice(&bytes[16..json_end])?;
    let version = meta.get("format_version").and_then(Value::as_u64);
    if version != Some(FORMAT_VERSION) {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version:?}, expected {FORMAT_VERSION}"
        )));
    }
    let kind = meta.get("kind").and_then(Value::as_str).unwrap_or("");
    if kind != expected_kind {
        return Err(Error::Checkpoint(format!("expected a {expected_kind} checkpoint, found `{kind}`")));
    }
    let count = meta
        .get("param_count")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Checkpoint("missing param_count".into()))? as usize;
    let payload = &bytes[json_end..];
    if payload.len() != 4 * count {
        return Err(Error::Checkpoint(format!(
            "expected {count} parameters ({} bytes), found {} bytes",
            4 * count,
            payload.len()
        )));
    }
    let params = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((meta, params))
}

pub fn save(path: impl AsRef<Path>, kind: &str, metadata: Value, params: &[f32]) -> Result<()> {
    std::fs::write(path, encode(kind, metadata, params)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>, expected_kind: &str) -> Result<(Value, Vec<f32>)> {
    decode(&std::fs::read(path)?, expected_kind)
}

//! Versioned binary checkpoint container.
//!
//! ```text
//! 0..4    magic "LLCK"
//! 4..8    version u32 = 1
//! 8..12   metadata length n (u32)
//! 12..12+n  metadata JSON: model config, fusion config, tensor manifest
//! ...     tensors as f32 little-endian, in manifest order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fusion::FusionConfig;
use super::network::{ModelConfig, ModelParams};
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"LLCK";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    model: ModelConfig,
    fusion: FusionConfig,
    tensors: Vec<TensorEntry>,
}

pub fn encode_checkpoint(params: &ModelParams<f32>, fusion: &FusionConfig) -> Result<Vec<u8>> {
    let tensors = params.tensors();
    let meta = Metadata {
        model: params.config,
        fusion: *fusion,
        tensors: tensors
            .iter()
            .map(|(name, _, t)| TensorEntry {
                name: name.clone(),
                len: t.len(),
            })
            .collect(),
    };
    let meta = serde_json::to_vec(&meta)?;
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for (_, _, t) in tensors {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParams<f32>, FusionConfig)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 12 || bytes[..4] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let meta_end = 12 + meta_len;
    if bytes.len() < meta_end {
        return Err(bad("truncated metadata"));
    }
    let meta: Metadata = serde_json::from_slice(&bytes[12..meta_end])?;

    // Rebuild the architecture from metadata, then check the manifest matches.
    let mut params = ModelParams::<f32>::init(meta.model, &meta.fusion, 0)?;
    let expected: Vec<(String, usize)> = params.tensors().into_iter().map(|(n, _, t)| (n, t.len())).collect();
    let stored: Vec<(String, usize)> = meta.tensors.iter().map(|e| (e.name.clone(), e.len)).collect();
    if expected != stored {
        return Err(bad("tensor manifest does not match architecture metadata"));
    }
    let total: usize = stored.iter().map(|(_, n)| n).sum();
    let payload = &bytes[meta_end..];
    if payload.len() != total * 4 {
        return Err(Error::Truncated {
            expected: meta_end + total * 4,
            found: bytes.len(),
        });
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    for (_, _, t) in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    if !params.is_finite() {
        return Err(bad("non-finite parameter values"));
    }
    Ok((params, meta.fusion))
}

pub fn save_checkpoint(params: &ModelParams<f32>, fusion: &FusionConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params, fusion)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams<f32>, FusionConfig)> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

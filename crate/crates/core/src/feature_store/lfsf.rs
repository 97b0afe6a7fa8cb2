//! Layered Feature Sequence File (LFSF) reader and writer.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 0..4    magic "LFSF"
//! 4..8    version u32 = 1
//! 8..12   layer count L u32
//! 12..16  frame count T u32
//! 16..20  feature dim D u32
//! 20..24  frames per second f32
//! 24..32  reserved, zero
//! 32..    L*T*D f32 values, [layer][frame][dim]
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::FeatureSequence;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"LFSF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

/// Serializes `seq` into the LFSF byte layout.
pub fn encode(seq: &FeatureSequence) -> Result<Vec<u8>> {
    seq.validate()?;
    let mut out = Vec::with_capacity(HEADER_LEN + seq.data().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for dim in [seq.layer_count(), seq.frame_count(), seq.feature_dim()] {
        let dim = u32::try_from(dim).map_err(|_| Error::Shape(format!("dimension {dim} does not fit in u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    out.extend_from_slice(&seq.fps().to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for v in seq.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses and fully validates an LFSF byte buffer.
pub fn decode(bytes: &[u8]) -> Result<FeatureSequence> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let layers = u32_at(8) as usize;
    let frames = u32_at(12) as usize;
    let dim = u32_at(16) as usize;
    let fps = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    if bytes[24..32].iter().any(|&b| b != 0) {
        return Err(Error::Shape("reserved header bytes are not zero".into()));
    }

    let count = layers
        .checked_mul(frames)
        .and_then(|n| n.checked_mul(dim))
        .ok_or_else(|| Error::Shape("L*T*D overflows".into()))?;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Shape("payload size overflows".into()))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Shape(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }

    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureSequence::new(layers, frames, dim, fps, data)
}

pub fn write_lfsf(seq: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(seq)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_lfsf(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

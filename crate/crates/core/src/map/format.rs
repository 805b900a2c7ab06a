//! SMAP / BMSK interchange format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic, "SMAP" (saliency) or "BMSK" (binary mask)
//! 4       4     format version (u32, currently 1)
//! 8       4     height (u32)
//! 12      4     width (u32)
//! 16      4*n   n = height*width IEEE-754 f32 values, row-major
//! ```
//!
//! BMSK payload values are restricted to exactly 0.0 or 1.0.

use std::fs;
use std::path::Path;

use super::{BinaryMask, GridDims, SalMap};
use crate::error::{Error, Result};

pub const SMAP_MAGIC: [u8; 4] = *b"SMAP";
pub const MASK_MAGIC: [u8; 4] = *b"BMSK";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        path: None,
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Format { offset, reason, .. } => Error::Format {
            path: Some(path.to_path_buf()),
            offset,
            reason,
        },
        other => other,
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn encode(magic: [u8; 4], dims: GridDims, values: impl Iterator<Item = f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * dims.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.height as u32).to_le_bytes());
    out.extend_from_slice(&(dims.width as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Validates the header and payload length; returns dims and the payload slice.
fn decode_header(bytes: &[u8], magic: [u8; 4]) -> Result<(GridDims, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(format_err(
            bytes.len(),
            format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if bytes[..4] != magic {
        return Err(format_err(
            0,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(&magic)
            ),
        ));
    }
    let version = read_u32(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let height = read_u32(bytes, 8) as usize;
    let width = read_u32(bytes, 12) as usize;
    if height == 0 {
        return Err(format_err(8, "height is zero"));
    }
    if width == 0 {
        return Err(format_err(12, "width is zero"));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| format_err(8, "dimensions overflow"))?;
    if payload.len() != expected {
        return Err(format_err(
            HEADER_LEN + payload.len().min(expected),
            format!(
                "payload length mismatch: {height}x{width} needs {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    Ok((GridDims { height, width }, payload))
}

fn payload_values(payload: &[u8]) -> impl Iterator<Item = (usize, f32)> + '_ {
    payload.chunks_exact(4).enumerate().map(|(i, c)| {
        (
            HEADER_LEN + 4 * i,
            f32::from_le_bytes(c.try_into().unwrap()),
        )
    })
}

pub fn encode_smap(map: &SalMap) -> Vec<u8> {
    encode(SMAP_MAGIC, map.dims(), map.data().iter().copied())
}

pub fn decode_smap(bytes: &[u8]) -> Result<SalMap> {
    let (dims, payload) = decode_header(bytes, SMAP_MAGIC)?;
    let mut data = Vec::with_capacity(dims.len());
    for (offset, v) in payload_values(payload) {
        if !v.is_finite() {
            return Err(format_err(offset, format!("non-finite value {v}")));
        }
        if v < 0.0 {
            return Err(format_err(offset, format!("negative value {v}")));
        }
        data.push(v);
    }
    Ok(SalMap::from_raw(dims, data))
}

pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    encode(
        MASK_MAGIC,
        mask.dims(),
        mask.data().iter().map(|&v| v as f32),
    )
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let (dims, payload) = decode_header(bytes, MASK_MAGIC)?;
    let mut data = Vec::with_capacity(dims.len());
    for (offset, v) in payload_values(payload) {
        // -0.0 is rejected along with anything else that is not bit-exactly 0.0 or 1.0
        match v.to_bits() {
            0x0000_0000 => data.push(0),
            0x3f80_0000 => data.push(1),
            _ => {
                return Err(format_err(
                    offset,
                    format!("mask value {v} is not 0.0 or 1.0"),
                ))
            }
        }
    }
    BinaryMask::new(dims, data)
}

pub fn load_smap(path: impl AsRef<Path>) -> Result<SalMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_smap(&bytes).map_err(|e| with_path(e, path))
}

pub fn save_smap(map: &SalMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_smap(map)).map_err(|e| Error::io(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(&bytes).map_err(|e| with_path(e, path))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}

//! Little-endian value arrays on disk.

use std::fs;
use std::path::Path;

use vem_core::dataset::ValueWidth;

use crate::error::{io_err, parse_err, Error, Result};

pub fn encode_f64s(values: &[f64], width: ValueWidth) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * width.bytes());
    for &v in values {
        match width {
            ValueWidth::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            ValueWidth::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn encode_u32s(values: &[u32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Reads `path`, requiring exactly `count * item_bytes` bytes.
pub fn read_exact_size(path: &Path, count: usize, item_bytes: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let expected = (count * item_bytes) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

/// Decodes `count` finite floats of `width` from `path`.
pub fn read_f64s(path: &Path, count: usize, width: ValueWidth) -> Result<Vec<f64>> {
    let bytes = read_exact_size(path, count, width.bytes())?;
    let values: Vec<f64> = match width {
        ValueWidth::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
        ValueWidth::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(parse_err(path, format!("non-finite value at index {i}")));
    }
    Ok(values)
}

pub fn read_u32s(path: &Path, count: usize) -> Result<Vec<u32>> {
    let bytes = read_exact_size(path, count, 4)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect())
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

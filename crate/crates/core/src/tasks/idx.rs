//! Reader for the IDX container used by the MNIST family of datasets.
//!
//! Header: two zero bytes, a type byte (`0x08` = unsigned byte), the number
//! of dimensions, then one big-endian `u32` per dimension, then the payload.

use std::path::Path;

use crate::error::{Result, VsmlError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn len(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of one item along the leading axis (e.g. `rows * cols`).
    pub fn item_size(&self) -> usize {
        self.shape[1..].iter().product()
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> VsmlError {
    VsmlError::Format {
        offset,
        message: message.into(),
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(format_err(bytes.len(), "truncated magic number"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(format_err(0, format!("bad magic {:02x}{:02x}", bytes[0], bytes[1])));
    }
    if bytes[2] != 0x08 {
        return Err(format_err(2, format!("unsupported element type 0x{:02x}", bytes[2])));
    }
    let ndims = bytes[3] as usize;
    if !(1..=3).contains(&ndims) {
        return Err(format_err(3, format!("unsupported rank {ndims}")));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(format_err(bytes.len(), "truncated dimension header"));
    }
    let shape: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected: usize = shape.iter().product();
    let actual = bytes.len() - header;
    if actual != expected {
        return Err(format_err(
            header,
            format!("payload length: expected {expected} bytes, got {actual}"),
        ));
    }
    Ok(IdxTensor {
        shape,
        data: bytes[header..].to_vec(),
    })
}

pub fn read_idx_file(path: &Path) -> Result<IdxTensor> {
    let bytes = std::fs::read(path)?;
    parse_idx(&bytes)
}

/// Serialize a tensor back into IDX bytes.
pub fn encode_idx(t: &IdxTensor) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, t.shape.len() as u8];
    for &d in &t.shape {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&t.data);
    out
}

//! IDX tensors: two zero bytes, an element-type code, the dimension count,
//! big-endian `u32` sizes, then the big-endian payload.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxElement {
    U8,
    I8,
    I16,
    I32,
    F32,
    F64,
}

impl IdxElement {
    fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0x08 => IdxElement::U8,
            0x09 => IdxElement::I8,
            0x0B => IdxElement::I16,
            0x0C => IdxElement::I32,
            0x0D => IdxElement::F32,
            0x0E => IdxElement::F64,
            other => {
                return Err(Error::Idx(format!(
                    "unsupported element type 0x{other:02X}"
                )))
            }
        })
    }

    fn code(self) -> u8 {
        match self {
            IdxElement::U8 => 0x08,
            IdxElement::I8 => 0x09,
            IdxElement::I16 => 0x0B,
            IdxElement::I32 => 0x0C,
            IdxElement::F32 => 0x0D,
            IdxElement::F64 => 0x0E,
        }
    }

    pub fn size(self) -> usize {
        match self {
            IdxElement::U8 | IdxElement::I8 => 1,
            IdxElement::I16 => 2,
            IdxElement::I32 | IdxElement::F32 => 4,
            IdxElement::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub element: IdxElement,
    /// Raw element values in row-major order.
    pub values: Vec<f64>,
}

impl IdxTensor {
    /// Number of items along the first axis.
    pub fn items(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    /// Elements per item (product of the trailing dimensions).
    pub fn item_size(&self) -> usize {
        self.dims.iter().skip(1).product()
    }

    /// Values rescaled to `[0, 1]`: bytes are divided by 255, floats must
    /// already be in range.
    pub fn unit_scaled(&self) -> Result<Vec<f64>> {
        match self.element {
            IdxElement::U8 => Ok(self.values.iter().map(|v| v / 255.0).collect()),
            IdxElement::F32 | IdxElement::F64 => {
                if self.values.iter().all(|v| (0.0..=1.0).contains(v)) {
                    Ok(self.values.clone())
                } else {
                    Err(Error::Idx("float image values outside [0, 1]".into()))
                }
            }
            other => Err(Error::Idx(format!("cannot rescale {other:?} images"))),
        }
    }
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(Error::Idx(format!(
            "truncated header: need 4 magic bytes, missing {}",
            4 - bytes.len()
        )));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Idx(format!(
            "bad magic 0x{:02X}{:02X}{:02X}{:02X}",
            bytes[0], bytes[1], bytes[2], bytes[3]
        )));
    }
    let element = IdxElement::from_code(bytes[2])?;
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(Error::Idx("tensor must have at least one dimension".into()));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Idx(format!(
            "truncated header: missing {} bytes of dimension sizes",
            header - bytes.len()
        )));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Idx("dimension product overflows".into()))?;
    let expected = count
        .checked_mul(element.size())
        .ok_or_else(|| Error::Idx("payload size overflows".into()))?;
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(Error::Idx(format!(
            "truncated payload: expected {expected} bytes, missing {}",
            expected - payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::Idx(format!(
            "payload has {} trailing bytes",
            payload.len() - expected
        )));
    }
    let values = match element {
        IdxElement::U8 => payload.iter().map(|&b| b as f64).collect(),
        IdxElement::I8 => payload.iter().map(|&b| b as i8 as f64).collect(),
        IdxElement::I16 => payload
            .chunks_exact(2)
            .map(|c| i16::from_be_bytes([c[0], c[1]]) as f64)
            .collect(),
        IdxElement::I32 => payload
            .chunks_exact(4)
            .map(|c| i32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        IdxElement::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        IdxElement::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    Ok(IdxTensor {
        dims,
        element,
        values,
    })
}

/// Serializes a tensor; values are cast to the element type.
pub fn encode_idx(tensor: &IdxTensor) -> Vec<u8> {
    let mut out = vec![0, 0, tensor.element.code(), tensor.dims.len() as u8];
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for &v in &tensor.values {
        match tensor.element {
            IdxElement::U8 => out.push(v as u8),
            IdxElement::I8 => out.push(v as i8 as u8),
            IdxElement::I16 => out.extend_from_slice(&(v as i16).to_be_bytes()),
            IdxElement::I32 => out.extend_from_slice(&(v as i32).to_be_bytes()),
            IdxElement::F32 => out.extend_from_slice(&(v as f32).to_be_bytes()),
            IdxElement::F64 => out.extend_from_slice(&v.to_be_bytes()),
        }
    }
    out
}

/// Reads an IDX file, transparently decompressing gzip input.
pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxTensor> {
    let path = path.as_ref();
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        out
    } else {
        raw
    };
    parse_idx(&bytes).map_err(|e| Error::Idx(format!("{}: {e}", path.display())))
}

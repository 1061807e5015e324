//! The `FVRF` binary tensor format: magic `FVRF`, version `u32` = 1, `ndim` as
//! `u32`, `ndim` dimensions as `u64`, then an `f64` row-major payload. All
//! integers and floats are little-endian.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FVRF";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidParameter(format!(
                "tensor dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.dims.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let take = |at: usize, n: usize| -> std::result::Result<&[u8], String> {
            bytes.get(at..at + n).ok_or_else(|| format!("truncated at byte {at}"))
        };
        if take(0, 4)? != MAGIC {
            return Err("missing FVRF magic".into());
        }
        let version = u32::from_le_bytes(take(4, 4)?.try_into().unwrap());
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let ndim = u32::from_le_bytes(take(8, 4)?.try_into().unwrap()) as usize;
        let mut dims = Vec::with_capacity(ndim);
        let mut at = 12;
        for _ in 0..ndim {
            dims.push(u64::from_le_bytes(take(at, 8)?.try_into().unwrap()) as usize);
            at += 8;
        }
        let count: usize = dims.iter().product();
        if bytes.len() != at + 8 * count {
            return Err(format!(
                "payload holds {} bytes, dims {dims:?} need {}",
                bytes.len() - at,
                8 * count
            ));
        }
        let data = bytes[at..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        })
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![2, 1], vec![1.5, -2.0]).unwrap();
        let b = t.encode();
        assert_eq!(&b[0..4], b"FVRF");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..20], &2u64.to_le_bytes());
        assert_eq!(&b[20..28], &1u64.to_le_bytes());
        assert_eq!(&b[28..36], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 44);
    }

    #[test]
    fn rejects_corrupt_input() {
        let t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut b = t.encode();
        b.pop();
        assert!(Tensor::decode(&b).is_err());
        let mut b = t.encode();
        b[0] = b'X';
        assert!(Tensor::decode(&b).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(rows in 0usize..5, cols in 0usize..7, seed in any::<u64>()) {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| f64::from_bits(seed.wrapping_mul(i as u64 + 1) >> 2))
                .collect();
            let t = Tensor::new(vec![rows, cols], data).unwrap();
            let back = Tensor::decode(&t.encode()).unwrap();
            prop_assert_eq!(back.dims, t.dims);
            prop_assert!(back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}

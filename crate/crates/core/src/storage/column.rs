//! 4-byte columns and their on-disk format.
//!
//! A column file is a 16-byte header followed by the raw little-endian
//! payload:
//!
//! | bytes | field                         |
//! |-------|-------------------------------|
//! | 0..4  | magic `CRYS`                  |
//! | 4..6  | format version (u16, LE)      |
//! | 6     | element kind (0 int32, 1 f32) |
//! | 7     | reserved, zero                |
//! | 8..16 | element count (u64, LE)       |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StorageError;

pub const MAGIC: [u8; 4] = *b"CRYS";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElemKind {
    Int32,
    Float32,
}

impl ElemKind {
    fn tag(self) -> u8 {
        match self {
            ElemKind::Int32 => 0,
            ElemKind::Float32 => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, StorageError> {
        match tag {
            0 => Ok(ElemKind::Int32),
            1 => Ok(ElemKind::Float32),
            t => Err(StorageError::UnknownKind(t)),
        }
    }
}

impl std::fmt::Display for ElemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ElemKind::Int32 => "int32",
            ElemKind::Float32 => "float32",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Int32(Vec<i32>),
    Float32(Vec<f32>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn int32(name: impl Into<String>, values: Vec<i32>) -> Self {
        Self {
            name: name.into(),
            data: ColumnData::Int32(values),
        }
    }

    pub fn float32(name: impl Into<String>, values: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            data: ColumnData::Float32(values),
        }
    }

    pub fn kind(&self) -> ElemKind {
        match self.data {
            ColumnData::Int32(_) => ElemKind::Int32,
            ColumnData::Float32(_) => ElemKind::Float32,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Int32(v) => v.len(),
            ColumnData::Float32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_i32(&self) -> Option<&[i32]> {
        match &self.data {
            ColumnData::Int32(v) => Some(v),
            ColumnData::Float32(_) => None,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            ColumnData::Float32(v) => Some(v),
            ColumnData::Int32(_) => None,
        }
    }

    /// Raw 4-byte patterns, independent of kind.
    fn words(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        match &self.data {
            ColumnData::Int32(v) => Box::new(v.iter().map(|&x| x as u32)),
            ColumnData::Float32(v) => Box::new(v.iter().map(|x| x.to_bits())),
        }
    }
}

pub fn encode_header(kind: ElemKind, len: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(&MAGIC);
    h[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    h[6] = kind.tag();
    h[8..16].copy_from_slice(&len.to_le_bytes());
    h
}

pub fn save_column(path: &Path, column: &Column) -> Result<(), StorageError> {
    let io = |e: std::io::Error| StorageError::io(path, e);
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path).map_err(io)?);
    w.write_all(&encode_header(column.kind(), column.len() as u64))
        .map_err(io)?;
    let mut buf = Vec::with_capacity(64 * 1024);
    for word in column.words() {
        buf.extend_from_slice(&word.to_le_bytes());
        if buf.len() >= 64 * 1024 {
            w.write_all(&buf).map_err(io)?;
            buf.clear();
        }
    }
    w.write_all(&buf).map_err(io)?;
    w.flush().map_err(io)
}

/// Reads a column file; the column is named after the file stem.
pub fn load_column(path: &Path) -> Result<Column, StorageError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| StorageError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_column(name, &bytes)
}

/// Like [`load_column`] but fails unless the file holds `expected` elements.
pub fn load_column_as(path: &Path, expected: ElemKind) -> Result<Column, StorageError> {
    let c = load_column(path)?;
    if c.kind() != expected {
        return Err(StorageError::KindMismatch {
            expected,
            found: c.kind(),
        });
    }
    Ok(c)
}

pub fn decode_column(name: String, bytes: &[u8]) -> Result<Column, StorageError> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(StorageError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(StorageError::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(StorageError::UnsupportedVersion(version));
    }
    let kind = ElemKind::from_tag(bytes[6])?;
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    let expected = len.checked_mul(4).ok_or(StorageError::Truncated {
        expected: u64::MAX,
        actual: payload.len() as u64,
    })?;
    if (payload.len() as u64) < expected {
        return Err(StorageError::Truncated {
            expected,
            actual: payload.len() as u64,
        });
    }
    if payload.len() as u64 > expected {
        return Err(StorageError::TrailingBytes {
            expected,
            actual: payload.len() as u64,
        });
    }
    let words = payload
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")));
    let data = match kind {
        ElemKind::Int32 => ColumnData::Int32(words.map(|w| w as i32).collect()),
        ElemKind::Float32 => ColumnData::Float32(words.map(f32::from_bits).collect()),
    };
    Ok(Column { name, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = encode_header(ElemKind::Float32, 3);
        assert_eq!(&h[..4], b"CRYS");
        assert_eq!(h[4..6], [1, 0]);
        assert_eq!(h[6], 1);
        assert_eq!(h[7], 0);
        assert_eq!(h[8], 3);
    }

    #[test]
    fn decode_errors_are_distinct() {
        let mut bytes = encode_header(ElemKind::Int32, 2).to_vec();
        bytes.extend_from_slice(&7i32.to_le_bytes());
        assert!(matches!(
            decode_column("c".into(), &bytes),
            Err(StorageError::Truncated { .. })
        ));
        bytes.extend_from_slice(&[0; 8]);
        assert!(matches!(
            decode_column("c".into(), &bytes),
            Err(StorageError::TrailingBytes { .. })
        ));
        assert!(matches!(
            decode_column("c".into(), b"NOPE0000000000000"),
            Err(StorageError::BadMagic)
        ));
        let mut v2 = encode_header(ElemKind::Int32, 0).to_vec();
        v2[4] = 9;
        assert!(matches!(
            decode_column("c".into(), &v2),
            Err(StorageError::UnsupportedVersion(9))
        ));
        let mut k = encode_header(ElemKind::Int32, 0).to_vec();
        k[6] = 7;
        assert!(matches!(
            decode_column("c".into(), &k),
            Err(StorageError::UnknownKind(7))
        ));
    }
}

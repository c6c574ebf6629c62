//! Columnar tables of 4-byte elements, dictionary encoding, the SSB data
//! generator and on-disk persistence.

mod column;
mod dictionary;
pub mod ssb;

pub use column::{
    decode_column, encode_header, load_column, load_column_as, save_column, Column, ColumnData,
    ElemKind, FORMAT_VERSION, HEADER_LEN, MAGIC,
};
pub use dictionary::{dict_decode, dict_encode, Dictionary};
pub use ssb::{
    check_referential_integrity, generate_ssb, generate_ssb_with, load_database, save_database,
    Cardinalities, Manifest, SsbDatabase,
};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StorageError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("not a column file (bad magic)")]
    BadMagic,
    #[error("unsupported column format version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown element kind tag {0}")]
    UnknownKind(u8),
    #[error("truncated column: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("column has {actual} payload bytes, header declares {expected}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("expected a {expected} column, found {found}")]
    KindMismatch { expected: ElemKind, found: ElemKind },
    #[error("scale factor must be at least 1, got {0}")]
    InvalidScaleFactor(u32),
    #[error("table {0} not found")]
    MissingTable(String),
    #[error("column {table}.{column} not found")]
    MissingColumn { table: String, column: String },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("{column} references missing key {value}")]
    ReferentialIntegrity { column: String, value: i32 },
}

impl StorageError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        StorageError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        let t = Self {
            name: name.into(),
            columns,
        };
        debug_assert!(
            t.columns.windows(2).all(|w| w[0].len() == w[1].len()),
            "ragged table {}",
            t.name
        );
        t
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn column(&self, name: &str) -> Result<&Column, StorageError> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| StorageError::MissingColumn {
                table: self.name.clone(),
                column: name.into(),
            })
    }

    pub fn i32s(&self, name: &str) -> Result<&[i32], StorageError> {
        let c = self.column(name)?;
        c.as_i32().ok_or(StorageError::KindMismatch {
            expected: ElemKind::Int32,
            found: c.kind(),
        })
    }
}

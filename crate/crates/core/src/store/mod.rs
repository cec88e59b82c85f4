//! A small columnar file format with per-module encryption and optional
//! page compression.

pub mod codec;
pub mod format;
mod reader;
mod writer;

use thiserror::Error;

use crate::crypto::CryptoError;

pub use codec::{compress_page, decompress_page, CodecKind};
pub use format::{
    ColumnChunkMeta, EncryptionMode, FileFooter, ModuleDescriptor, ModuleType, RowGroupMeta,
};
pub use reader::{
    open_file, scan_column, ColumnScan, FileReader, ScanCounters, ScanObserver, DEFAULT_READ_CHUNK,
};
pub use writer::{write_table, write_table_traced, IssuedNonce, WriteOptions};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("authentication failed for {0:?} module")]
    Authentication(ModuleType),
    #[error("page checksum mismatch at data page {0}")]
    ChecksumMismatch(u32),
    #[error("format error: {0}")]
    Format(String),
    #[error("codec error: {0}")]
    Codec(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

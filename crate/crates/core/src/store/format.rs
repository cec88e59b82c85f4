//! On-disk structures and their little-endian encodings. The byte layout is
//! documented in `format.md` at the repository root.

use serde::{Deserialize, Serialize};

use super::codec::CodecKind;
use super::StoreError;
use crate::crypto::NONCE_LEN;
use crate::vector::{Field, LogicalType, Scalar};

pub const MAGIC_ENCRYPTED: &[u8; 4] = b"CENC";
pub const MAGIC_PLAIN: &[u8; 4] = b"CPLN";
pub const FORMAT_VERSION: u32 = 1;
pub const TRAILER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncryptionMode {
    None,
    /// Every module sealed with AES-GCM.
    GcmAll,
    /// Data pages use AES-CTR; footer, index and page headers use AES-GCM.
    GcmCtrPages,
}

impl EncryptionMode {
    fn code(self) -> u8 {
        match self {
            EncryptionMode::None => 0,
            EncryptionMode::GcmAll => 1,
            EncryptionMode::GcmCtrPages => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(EncryptionMode::None),
            1 => Some(EncryptionMode::GcmAll),
            2 => Some(EncryptionMode::GcmCtrPages),
            _ => None,
        }
    }

    pub fn is_encrypted(self) -> bool {
        self != EncryptionMode::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModuleType {
    Footer,
    PageHeader,
    ColumnIndex,
    DataPage,
}

impl ModuleType {
    pub fn code(self) -> u32 {
        match self {
            ModuleType::Footer => 0,
            ModuleType::PageHeader => 1,
            ModuleType::ColumnIndex => 2,
            ModuleType::DataPage => 3,
        }
    }
}

/// Identifies one module; the AAD is a pure function of the descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModuleDescriptor {
    pub file_id: [u8; 8],
    pub module_type: ModuleType,
    pub ordinal: u32,
}

impl ModuleDescriptor {
    /// 13 bytes: file id, module type, ordinal (LE). The footer is bound to
    /// the magic instead of the file id, which lives inside it.
    pub fn aad(&self) -> [u8; 13] {
        let mut aad = [0u8; 13];
        match self.module_type {
            ModuleType::Footer => aad[..4].copy_from_slice(MAGIC_ENCRYPTED),
            _ => aad[..8].copy_from_slice(&self.file_id),
        }
        aad[8] = self.module_type.code() as u8;
        aad[9..].copy_from_slice(&self.ordinal.to_le_bytes());
        aad
    }
}

/// First four bytes of the file id followed by the per-file module counter.
pub fn module_nonce(file_id: &[u8; 8], counter: u64) -> [u8; NONCE_LEN] {
    let mut n = [0u8; NONCE_LEN];
    n[..4].copy_from_slice(&file_id[..4]);
    n[4..].copy_from_slice(&counter.to_le_bytes());
    n
}

/// Initial CTR block for a data page: nonce followed by a 32-bit counter of 1.
pub fn ctr_block(nonce: &[u8; NONCE_LEN]) -> [u8; 16] {
    let mut b = [0u8; 16];
    b[..NONCE_LEN].copy_from_slice(nonce);
    b[15] = 1;
    b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnChunkMeta {
    /// Absolute offset of the chunk (its column index module comes first).
    pub offset: u64,
    /// Bytes on disk: index, page headers and data pages.
    pub on_disk_len: u64,
    pub compressed_len: u64,
    pub uncompressed_len: u64,
    pub page_count: u32,
    pub first_page_ordinal: u32,
    pub index_len: u32,
    pub chunk_ordinal: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowGroupMeta {
    pub row_count: u64,
    pub columns: Vec<ColumnChunkMeta>,
}

impl RowGroupMeta {
    pub fn start(&self) -> u64 {
        self.columns.first().map_or(0, |c| c.offset)
    }

    pub fn end(&self) -> u64 {
        self.columns
            .iter()
            .map(|c| c.offset + c.on_disk_len)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileFooter {
    pub format_version: u32,
    pub file_id: [u8; 8],
    pub schema: Vec<Field>,
    pub codec: CodecKind,
    pub encryption_mode: EncryptionMode,
    pub num_rows: u64,
    pub row_group_index: Vec<RowGroupMeta>,
    /// On-disk length of the footer module plus the trailer (not serialized).
    #[serde(skip)]
    pub footer_bytes: u64,
}

impl FileFooter {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageHeader {
    pub value_count: u32,
    pub encoding: u8,
    pub compressed_len: u32,
    pub uncompressed_len: u32,
    pub data_ordinal: u32,
    /// SHA-256 of the on-disk data page, present for CTR pages.
    pub page_hash: Option<[u8; 32]>,
}

pub const ENCODING_PLAIN: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct PageLocation {
    pub value_count: u32,
    pub header_len: u32,
    pub data_len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnIndex {
    pub pages: Vec<PageLocation>,
    pub min_max: Option<(Scalar, Scalar)>,
}

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
    pub fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| StoreError::Format("structure truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn finish(&self) -> Result<(), StoreError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(StoreError::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )))
        }
    }
}

fn write_type(w: &mut Writer, ty: LogicalType) {
    match ty {
        LogicalType::Int64 => w.u8(0),
        LogicalType::Float64 => w.u8(1),
        LogicalType::Date => w.u8(2),
        LogicalType::FixedString(width) => {
            w.u8(3);
            w.u8(width);
        }
    }
}

fn read_type(r: &mut Reader) -> Result<LogicalType, StoreError> {
    Ok(match r.u8()? {
        0 => LogicalType::Int64,
        1 => LogicalType::Float64,
        2 => LogicalType::Date,
        3 => LogicalType::FixedString(r.u8()?),
        t => return Err(StoreError::Format(format!("unknown type code {t}"))),
    })
}

fn write_scalar(w: &mut Writer, s: &Scalar) {
    match s {
        Scalar::Int(v) => w.u64(*v as u64),
        Scalar::Float(v) => w.u64(v.to_bits()),
        Scalar::Date(v) => w.u32(*v as u32),
        Scalar::Str(v) => {
            w.u8(v.len() as u8);
            w.bytes(v.as_bytes());
        }
    }
}

fn read_scalar(r: &mut Reader, ty: LogicalType) -> Result<Scalar, StoreError> {
    Ok(match ty {
        LogicalType::Int64 => Scalar::Int(r.u64()? as i64),
        LogicalType::Float64 => Scalar::Float(f64::from_bits(r.u64()?)),
        LogicalType::Date => Scalar::Date(r.u32()? as i32),
        LogicalType::FixedString(_) => {
            let n = r.u8()? as usize;
            let b = r.take(n)?;
            Scalar::Str(
                String::from_utf8(b.to_vec())
                    .map_err(|_| StoreError::Format("invalid UTF-8".into()))?,
            )
        }
    })
}

impl FileFooter {
    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.format_version);
        w.bytes(&self.file_id);
        w.u8(self.codec.code());
        w.u8(self.encryption_mode.code());
        w.u64(self.num_rows);
        w.u32(self.schema.len() as u32);
        for f in &self.schema {
            w.u16(f.name.len() as u16);
            w.bytes(f.name.as_bytes());
            write_type(&mut w, f.ty);
        }
        w.u32(self.row_group_index.len() as u32);
        for rg in &self.row_group_index {
            w.u64(rg.row_count);
            for c in &rg.columns {
                w.u64(c.offset);
                w.u64(c.on_disk_len);
                w.u64(c.compressed_len);
                w.u64(c.uncompressed_len);
                w.u32(c.page_count);
                w.u32(c.first_page_ordinal);
                w.u32(c.index_len);
                w.u32(c.chunk_ordinal);
            }
        }
        w.buf
    }

    pub(crate) fn decode(buf: &[u8]) -> Result<Self, StoreError> {
        let mut r = Reader::new(buf);
        let format_version = r.u32()?;
        if format_version != FORMAT_VERSION {
            return Err(StoreError::Format(format!(
                "unsupported format version {format_version}"
            )));
        }
        let file_id: [u8; 8] = r.take(8)?.try_into().unwrap();
        let codec = CodecKind::from_code(r.u8()?)
            .ok_or_else(|| StoreError::Format("unknown codec".into()))?;
        let encryption_mode = EncryptionMode::from_code(r.u8()?)
            .ok_or_else(|| StoreError::Format("unknown encryption mode".into()))?;
        let num_rows = r.u64()?;
        let ncols = r.u32()? as usize;
        let mut schema = Vec::with_capacity(ncols.min(4096));
        for _ in 0..ncols {
            let n = r.u16()? as usize;
            let name = String::from_utf8(r.take(n)?.to_vec())
                .map_err(|_| StoreError::Format("column name".into()))?;
            schema.push(Field {
                name,
                ty: read_type(&mut r)?,
            });
        }
        let nrg = r.u32()? as usize;
        let mut row_group_index = Vec::with_capacity(nrg.min(1 << 16));
        for _ in 0..nrg {
            let row_count = r.u64()?;
            let mut columns = Vec::with_capacity(ncols);
            for _ in 0..ncols {
                columns.push(ColumnChunkMeta {
                    offset: r.u64()?,
                    on_disk_len: r.u64()?,
                    compressed_len: r.u64()?,
                    uncompressed_len: r.u64()?,
                    page_count: r.u32()?,
                    first_page_ordinal: r.u32()?,
                    index_len: r.u32()?,
                    chunk_ordinal: r.u32()?,
                });
            }
            row_group_index.push(RowGroupMeta { row_count, columns });
        }
        r.finish()?;
        let footer = FileFooter {
            format_version,
            file_id,
            schema,
            codec,
            encryption_mode,
            num_rows,
            row_group_index,
            footer_bytes: 0,
        };
        footer.validate()?;
        Ok(footer)
    }

    fn validate(&self) -> Result<(), StoreError> {
        let mut prev_end = 0u64;
        let mut rows = 0u64;
        for rg in &self.row_group_index {
            for c in &rg.columns {
                if c.offset < prev_end {
                    return Err(StoreError::Format(
                        "column chunks overlap or are out of order".into(),
                    ));
                }
                prev_end = c.offset + c.on_disk_len;
            }
            rows += rg.row_count;
        }
        if rows != self.num_rows {
            return Err(StoreError::Format(
                "row group counts do not sum to num_rows".into(),
            ));
        }
        Ok(())
    }
}

impl PageHeader {
    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.value_count);
        w.u8(self.encoding);
        w.u32(self.compressed_len);
        w.u32(self.uncompressed_len);
        w.u32(self.data_ordinal);
        match &self.page_hash {
            Some(h) => {
                w.u8(1);
                w.bytes(h);
            }
            None => w.u8(0),
        }
        w.buf
    }

    pub(crate) fn decode(buf: &[u8]) -> Result<Self, StoreError> {
        let mut r = Reader::new(buf);
        let h = PageHeader {
            value_count: r.u32()?,
            encoding: r.u8()?,
            compressed_len: r.u32()?,
            uncompressed_len: r.u32()?,
            data_ordinal: r.u32()?,
            page_hash: match r.u8()? {
                0 => None,
                1 => Some(r.take(32)?.try_into().unwrap()),
                f => return Err(StoreError::Format(format!("bad hash flag {f}"))),
            },
        };
        r.finish()?;
        Ok(h)
    }
}

impl ColumnIndex {
    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.pages.len() as u32);
        for p in &self.pages {
            w.u32(p.value_count);
            w.u32(p.header_len);
            w.u32(p.data_len);
        }
        match &self.min_max {
            Some((lo, hi)) => {
                w.u8(1);
                write_scalar(&mut w, lo);
                write_scalar(&mut w, hi);
            }
            None => w.u8(0),
        }
        w.buf
    }

    pub(crate) fn decode(buf: &[u8], ty: LogicalType) -> Result<Self, StoreError> {
        let mut r = Reader::new(buf);
        let n = r.u32()? as usize;
        let mut pages = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            pages.push(PageLocation {
                value_count: r.u32()?,
                header_len: r.u32()?,
                data_len: r.u32()?,
            });
        }
        let min_max = match r.u8()? {
            0 => None,
            1 => Some((read_scalar(&mut r, ty)?, read_scalar(&mut r, ty)?)),
            f => return Err(StoreError::Format(format!("bad stats flag {f}"))),
        };
        r.finish()?;
        Ok(ColumnIndex { pages, min_max })
    }
}

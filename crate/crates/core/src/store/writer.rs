use std::collections::HashSet;

use sha2::{Digest, Sha256};

use super::codec::{compress_page, CodecKind};
use super::format::*;
use super::StoreError;
use crate::crypto::{best_backend, AesKey, BackendKind, Cipher, NONCE_LEN};
use crate::vector::{Field, LogicalType, Scalar, Vector};

#[derive(Debug, Clone)]
pub struct WriteOptions {
    pub codec: CodecKind,
    pub encryption_mode: EncryptionMode,
    pub key: Option<AesKey>,
    /// Backend used for sealing; output bytes do not depend on it.
    pub backend: BackendKind,
    pub row_group_rows: usize,
    pub page_target_bytes: usize,
    pub statistics: bool,
    /// Defaults to a digest of the schema, options and column data.
    pub file_id: Option<[u8; 8]>,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            codec: CodecKind::Uncompressed,
            encryption_mode: EncryptionMode::None,
            key: None,
            backend: best_backend(),
            row_group_rows: 65536,
            page_target_bytes: 64 * 1024,
            statistics: true,
            file_id: None,
        }
    }
}

impl WriteOptions {
    pub fn encrypted(codec: CodecKind, mode: EncryptionMode, key: AesKey) -> Self {
        Self {
            codec,
            encryption_mode: mode,
            key: Some(key),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), StoreError> {
        if self.encryption_mode.is_encrypted() != self.key.is_some() {
            return Err(StoreError::Config(format!(
                "key must be present iff encryption is on (mode {:?}, key {})",
                self.encryption_mode,
                if self.key.is_some() {
                    "present"
                } else {
                    "absent"
                }
            )));
        }
        if self.row_group_rows == 0 {
            return Err(StoreError::Config("row_group_rows must be positive".into()));
        }
        if self.page_target_bytes < 256 {
            return Err(StoreError::Config(
                "page_target_bytes must be at least 256".into(),
            ));
        }
        Ok(())
    }
}

/// A nonce handed out while writing, with the module it protects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IssuedNonce {
    pub descriptor: ModuleDescriptor,
    pub nonce: [u8; NONCE_LEN],
}

pub fn write_table(
    schema: &[Field],
    columns: &[Vector],
    opts: &WriteOptions,
) -> Result<Vec<u8>, StoreError> {
    write_table_traced(schema, columns, opts).map(|(bytes, _)| bytes)
}

/// Like [`write_table`], also returning every nonce issued in order.
pub fn write_table_traced(
    schema: &[Field],
    columns: &[Vector],
    opts: &WriteOptions,
) -> Result<(Vec<u8>, Vec<IssuedNonce>), StoreError> {
    opts.validate()?;
    let num_rows = check_columns(schema, columns)?;
    let file_id = opts
        .file_id
        .unwrap_or_else(|| derive_file_id(schema, columns, opts));
    let cipher = match &opts.key {
        Some(k) if opts.encryption_mode.is_encrypted() => Some(Cipher::new(opts.backend, k)?),
        _ => None,
    };
    let mut w = FileWriter {
        out: Vec::new(),
        file_id,
        mode: opts.encryption_mode,
        cipher,
        counter: 0,
        issued: Vec::new(),
        seen: HashSet::new(),
        page_ordinal: 0,
        chunk_ordinal: 0,
    };

    let mut row_group_index = Vec::new();
    let mut start = 0;
    while start < num_rows {
        let end = (start + opts.row_group_rows).min(num_rows);
        let mut metas = Vec::with_capacity(columns.len());
        for col in columns {
            metas.push(w.write_chunk(&col.slice(start, end), opts)?);
        }
        row_group_index.push(RowGroupMeta {
            row_count: (end - start) as u64,
            columns: metas,
        });
        start = end;
    }

    let footer = FileFooter {
        format_version: FORMAT_VERSION,
        file_id,
        schema: schema.to_vec(),
        codec: opts.codec,
        encryption_mode: opts.encryption_mode,
        num_rows: num_rows as u64,
        row_group_index,
        footer_bytes: 0,
    };
    let module = w.seal(ModuleType::Footer, 0, &footer.encode());
    let footer_len = module.len() as u32;
    w.out.extend_from_slice(&module);
    w.out.extend_from_slice(&footer_len.to_le_bytes());
    w.out
        .extend_from_slice(if opts.encryption_mode.is_encrypted() {
            MAGIC_ENCRYPTED
        } else {
            MAGIC_PLAIN
        });
    Ok((w.out, w.issued))
}

fn check_columns(schema: &[Field], columns: &[Vector]) -> Result<usize, StoreError> {
    if schema.len() != columns.len() {
        return Err(StoreError::Schema(format!(
            "{} fields but {} columns",
            schema.len(),
            columns.len()
        )));
    }
    let mut names = HashSet::new();
    for f in schema {
        if !names.insert(f.name.as_str()) {
            return Err(StoreError::Schema(format!("duplicate column {}", f.name)));
        }
        if f.name.len() > u16::MAX as usize {
            return Err(StoreError::Schema("column name too long".into()));
        }
    }
    let rows = columns.first().map_or(0, Vector::len);
    for (f, c) in schema.iter().zip(columns) {
        if c.len() != rows {
            return Err(StoreError::Schema(format!(
                "column {} has {} rows, expected {rows}",
                f.name,
                c.len()
            )));
        }
        match (f.ty, c) {
            (LogicalType::Int64, Vector::Int64(_))
            | (LogicalType::Float64, Vector::Float64(_))
            | (LogicalType::Date, Vector::Date(_)) => {}
            (LogicalType::FixedString(width), Vector::Str(s)) => {
                if let Some(i) = (0..s.len()).find(|&i| s.get_bytes(i).len() > width as usize) {
                    return Err(StoreError::Schema(format!(
                        "value {i} of {} exceeds width {width}",
                        f.name
                    )));
                }
            }
            _ => {
                return Err(StoreError::Schema(format!(
                    "column {} does not match type {}",
                    f.name, f.ty
                )))
            }
        }
    }
    Ok(rows)
}

fn derive_file_id(schema: &[Field], columns: &[Vector], opts: &WriteOptions) -> [u8; 8] {
    let mut h = Sha256::new();
    h.update(b"file-id");
    for f in schema {
        h.update((f.name.len() as u64).to_le_bytes());
        h.update(f.name.as_bytes());
        h.update(f.ty.to_string().as_bytes());
    }
    h.update([opts.codec.code(), opts.encryption_mode as u8]);
    h.update((opts.row_group_rows as u64).to_le_bytes());
    h.update((opts.page_target_bytes as u64).to_le_bytes());
    for c in columns {
        h.update((c.len() as u64).to_le_bytes());
        for i in 0..c.len() {
            encode_value(&mut h, c, i);
        }
    }
    h.finalize()[..8].try_into().unwrap()
}

trait Sink {
    fn put(&mut self, b: &[u8]);
}

impl Sink for Vec<u8> {
    fn put(&mut self, b: &[u8]) {
        self.extend_from_slice(b);
    }
}

impl Sink for Sha256 {
    fn put(&mut self, b: &[u8]) {
        self.update(b);
    }
}

fn encode_value(out: &mut impl Sink, col: &Vector, i: usize) {
    match col {
        Vector::Int64(v) => out.put(&v[i].to_le_bytes()),
        Vector::Float64(v) => out.put(&v[i].to_bits().to_le_bytes()),
        Vector::Date(v) => out.put(&v[i].to_le_bytes()),
        Vector::Str(v) => {
            let b = v.get_bytes(i);
            out.put(&[b.len() as u8]);
            out.put(b);
        }
    }
}

fn encoded_len(col: &Vector, i: usize) -> usize {
    match col {
        Vector::Int64(_) | Vector::Float64(_) => 8,
        Vector::Date(_) => 4,
        Vector::Str(v) => 1 + v.get_bytes(i).len(),
    }
}

/// Splits a chunk into plain-encoded pages no larger than `target` bytes.
fn encode_pages(col: &Vector, target: usize) -> Vec<(u32, Vec<u8>)> {
    let mut pages = Vec::new();
    let mut cur = Vec::new();
    let mut count = 0u32;
    for i in 0..col.len() {
        if cur.len() + encoded_len(col, i) > target {
            pages.push((count, std::mem::take(&mut cur)));
            count = 0;
        }
        encode_value(&mut cur, col, i);
        count += 1;
    }
    if count > 0 {
        pages.push((count, cur));
    }
    pages
}

fn min_max(col: &Vector) -> Option<(Scalar, Scalar)> {
    let mut it = (0..col.len()).map(|i| col.get(i));
    let first = it.next()?;
    Some(it.fold((first.clone(), first), |(lo, hi), v| {
        let lo = if v.total_cmp(&lo).is_lt() {
            v.clone()
        } else {
            lo
        };
        let hi = if v.total_cmp(&hi).is_gt() { v } else { hi };
        (lo, hi)
    }))
}

struct FileWriter {
    out: Vec<u8>,
    file_id: [u8; 8],
    mode: EncryptionMode,
    cipher: Option<Cipher>,
    counter: u64,
    issued: Vec<IssuedNonce>,
    seen: HashSet<[u8; NONCE_LEN]>,
    page_ordinal: u32,
    chunk_ordinal: u32,
}

impl FileWriter {
    fn next_nonce(&mut self, descriptor: ModuleDescriptor) -> [u8; NONCE_LEN] {
        let nonce = module_nonce(&self.file_id, self.counter);
        self.counter += 1;
        assert!(
            self.seen.insert(nonce),
            "nonce issued twice within one file"
        );
        self.issued.push(IssuedNonce { descriptor, nonce });
        nonce
    }

    fn descriptor(&self, module_type: ModuleType, ordinal: u32) -> ModuleDescriptor {
        ModuleDescriptor {
            file_id: self.file_id,
            module_type,
            ordinal,
        }
    }

    /// GCM-seals a module, or passes it through when the file is plain.
    fn seal(&mut self, module_type: ModuleType, ordinal: u32, pt: &[u8]) -> Vec<u8> {
        if self.cipher.is_none() {
            return pt.to_vec();
        }
        let d = self.descriptor(module_type, ordinal);
        let nonce = self.next_nonce(d);
        let mut buf = pt.to_vec();
        let tag = self
            .cipher
            .as_ref()
            .unwrap()
            .seal_in_place(&nonce, &d.aad(), &mut buf);
        let mut out = Vec::with_capacity(NONCE_LEN + buf.len() + tag.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&buf);
        out.extend_from_slice(&tag);
        out
    }

    fn ctr_page(&mut self, ordinal: u32, pt: &[u8]) -> Vec<u8> {
        let d = self.descriptor(ModuleType::DataPage, ordinal);
        let nonce = self.next_nonce(d);
        let mut buf = pt.to_vec();
        self.cipher
            .as_ref()
            .unwrap()
            .ctr_in_place(&ctr_block(&nonce), &mut buf);
        let mut out = Vec::with_capacity(NONCE_LEN + buf.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&buf);
        out
    }

    fn write_chunk(
        &mut self,
        col: &Vector,
        opts: &WriteOptions,
    ) -> Result<ColumnChunkMeta, StoreError> {
        let offset = self.out.len() as u64;
        let first_page_ordinal = self.page_ordinal;
        let chunk_ordinal = self.chunk_ordinal;
        self.chunk_ordinal += 1;

        let mut headers = Vec::new();
        let mut data = Vec::new();
        let mut compressed_len = 0u64;
        let mut uncompressed_len = 0u64;
        for (value_count, raw) in encode_pages(col, opts.page_target_bytes) {
            let packed = compress_page(&raw, opts.codec);
            let ordinal = self.page_ordinal;
            self.page_ordinal += 1;
            compressed_len += packed.len() as u64;
            uncompressed_len += raw.len() as u64;
            let (page, page_hash) = match self.mode {
                EncryptionMode::GcmCtrPages => {
                    let page = self.ctr_page(ordinal, &packed);
                    let hash: [u8; 32] = Sha256::digest(&page).into();
                    (page, Some(hash))
                }
                _ => (self.seal(ModuleType::DataPage, ordinal, &packed), None),
            };
            let header = PageHeader {
                value_count,
                encoding: ENCODING_PLAIN,
                compressed_len: packed.len() as u32,
                uncompressed_len: raw.len() as u32,
                data_ordinal: ordinal,
                page_hash,
            };
            headers.push(self.seal(ModuleType::PageHeader, ordinal, &header.encode()));
            data.push((value_count, page));
        }

        let index = ColumnIndex {
            pages: headers
                .iter()
                .zip(&data)
                .map(|(h, (n, p))| PageLocation {
                    value_count: *n,
                    header_len: h.len() as u32,
                    data_len: p.len() as u32,
                })
                .collect(),
            min_max: if opts.statistics { min_max(col) } else { None },
        };
        let index = self.seal(ModuleType::ColumnIndex, chunk_ordinal, &index.encode());
        let index_len = index.len() as u32;
        self.out.extend_from_slice(&index);
        for (h, (_, p)) in headers.iter().zip(&data) {
            self.out.extend_from_slice(h);
            self.out.extend_from_slice(p);
        }
        Ok(ColumnChunkMeta {
            offset,
            on_disk_len: self.out.len() as u64 - offset,
            compressed_len,
            uncompressed_len,
            page_count: data.len() as u32,
            first_page_ordinal,
            index_len,
            chunk_ordinal,
        })
    }
}

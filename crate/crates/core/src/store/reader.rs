use serde::Serialize;
use sha2::{Digest, Sha256};

use super::codec::{decompress_page, CodecKind};
use super::format::*;
use super::StoreError;
use crate::crypto::{best_backend, AesKey, BackendKind, Cipher, NONCE_LEN, TAG_LEN};
use crate::vector::{Batch, LogicalType, Scalar, StrVec, Vector};

/// Size of one physical read when fetching a column chunk.
pub const DEFAULT_READ_CHUNK: usize = 1 << 20;

/// Receives the I/O and crypto events of a scan.
pub trait ScanObserver {
    fn physical_read(&mut self, _bytes: u64) {}
    fn decrypted(&mut self, _bytes: u64) {}
    fn decompressed(&mut self, _bytes: u64) {}
}

impl ScanObserver for () {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScanCounters {
    pub bytes_read: u64,
    pub bytes_decrypted: u64,
    pub bytes_decompressed: u64,
    pub physical_reads: u64,
}

impl ScanCounters {
    pub fn add(&mut self, o: &ScanCounters) {
        self.bytes_read += o.bytes_read;
        self.bytes_decrypted += o.bytes_decrypted;
        self.bytes_decompressed += o.bytes_decompressed;
        self.physical_reads += o.physical_reads;
    }
}

impl ScanObserver for ScanCounters {
    fn physical_read(&mut self, bytes: u64) {
        self.bytes_read += bytes;
        self.physical_reads += 1;
    }
    fn decrypted(&mut self, bytes: u64) {
        self.bytes_decrypted += bytes;
    }
    fn decompressed(&mut self, bytes: u64) {
        self.bytes_decompressed += bytes;
    }
}

/// Decrypts and parses the footer.
pub fn open_file(file: &[u8], key: Option<&AesKey>) -> Result<FileFooter, StoreError> {
    FileReader::open(file, key, best_backend()).map(|r| r.footer)
}

/// Streams one column in batches of `batch_rows` using an already opened footer.
pub fn scan_column<'a>(
    file: &'a [u8],
    footer: &FileFooter,
    column: &str,
    key: Option<&AesKey>,
    backend: BackendKind,
    batch_rows: usize,
) -> Result<ColumnScan<'a>, StoreError> {
    FileReader::with_footer(file, footer.clone(), key, backend)?.into_scan(column, batch_rows)
}

pub struct FileReader<'a> {
    file: &'a [u8],
    footer: FileFooter,
    cipher: Option<Cipher>,
    read_chunk: usize,
}

impl<'a> FileReader<'a> {
    pub fn open(
        file: &'a [u8],
        key: Option<&AesKey>,
        backend: BackendKind,
    ) -> Result<Self, StoreError> {
        if file.len() < TRAILER_LEN {
            return Err(StoreError::Format("file shorter than trailer".into()));
        }
        let body = file.len() - TRAILER_LEN;
        let footer_len = u32::from_le_bytes(file[body..body + 4].try_into().unwrap()) as usize;
        let encrypted = match &file[body + 4..] {
            m if m == MAGIC_ENCRYPTED => true,
            m if m == MAGIC_PLAIN => false,
            _ => return Err(StoreError::Format("bad magic".into())),
        };
        if footer_len > body {
            return Err(StoreError::Format("footer length exceeds file".into()));
        }
        let module = &file[body - footer_len..body];
        let cipher = match (encrypted, key) {
            (true, None) => {
                return Err(StoreError::Config(
                    "file is encrypted but no key was given".into(),
                ))
            }
            (true, Some(k)) => Some(Cipher::new(backend, k)?),
            (false, _) => None,
        };
        let pt = open_module(
            cipher.as_ref(),
            [0; 8],
            ModuleType::Footer,
            0,
            module,
            &mut (),
        )?;
        let mut footer = FileFooter::decode(&pt)?;
        if footer.encryption_mode.is_encrypted() != encrypted {
            return Err(StoreError::Format(
                "magic disagrees with footer encryption mode".into(),
            ));
        }
        footer.footer_bytes = (footer_len + TRAILER_LEN) as u64;
        Self::with_footer(file, footer, key, backend)
    }

    /// Reuses a footer obtained from an earlier [`open_file`].
    pub fn with_footer(
        file: &'a [u8],
        footer: FileFooter,
        key: Option<&AesKey>,
        backend: BackendKind,
    ) -> Result<Self, StoreError> {
        let cipher = match (footer.encryption_mode.is_encrypted(), key) {
            (true, None) => {
                return Err(StoreError::Config(
                    "file is encrypted but no key was given".into(),
                ))
            }
            (true, Some(k)) => Some(Cipher::new(backend, k)?),
            (false, _) => None,
        };
        let data_end =
            (file.len() as u64).saturating_sub(footer.footer_bytes.max(TRAILER_LEN as u64));
        if footer.row_group_index.iter().any(|rg| rg.end() > data_end) {
            return Err(StoreError::Format(
                "column chunk extends past the footer".into(),
            ));
        }
        Ok(Self {
            file,
            footer,
            cipher,
            read_chunk: DEFAULT_READ_CHUNK,
        })
    }

    pub fn set_read_chunk(&mut self, bytes: usize) {
        self.read_chunk = bytes.max(1);
    }

    pub fn footer(&self) -> &FileFooter {
        &self.footer
    }

    pub fn num_row_groups(&self) -> usize {
        self.footer.row_group_index.len()
    }

    /// Min/max of a column chunk, if the writer stored them.
    pub fn chunk_statistics(
        &self,
        row_group: usize,
        column: usize,
    ) -> Result<Option<(Scalar, Scalar)>, StoreError> {
        let meta = &self.footer.row_group_index[row_group].columns[column];
        let start = meta.offset as usize;
        let bytes = &self.file[start..start + meta.index_len as usize];
        let pt = open_module(
            self.cipher.as_ref(),
            self.footer.file_id,
            ModuleType::ColumnIndex,
            meta.chunk_ordinal,
            bytes,
            &mut (),
        )?;
        Ok(ColumnIndex::decode(&pt, self.footer.schema[column].ty)?.min_max)
    }

    /// Reads, verifies and decodes one column chunk.
    pub fn read_column_chunk(
        &self,
        row_group: usize,
        column: usize,
        obs: &mut dyn ScanObserver,
    ) -> Result<Vector, StoreError> {
        let rg = &self.footer.row_group_index[row_group];
        let meta = &rg.columns[column];
        let ty = self.footer.schema[column].ty;
        let start = meta.offset as usize;
        let chunk = &self.file[start..start + meta.on_disk_len as usize];
        for piece in chunk.chunks(self.read_chunk) {
            obs.physical_read(piece.len() as u64);
        }

        let file_id = self.footer.file_id;
        let cipher = self.cipher.as_ref();
        let mut cur = Cursor { buf: chunk, pos: 0 };
        let index_bytes = cur.take(meta.index_len as usize)?;
        let index_pt = open_module(
            cipher,
            file_id,
            ModuleType::ColumnIndex,
            meta.chunk_ordinal,
            index_bytes,
            obs,
        )?;
        let index = ColumnIndex::decode(&index_pt, ty)?;
        if index.pages.len() != meta.page_count as usize {
            return Err(StoreError::Format(
                "page count disagrees with footer".into(),
            ));
        }

        let mut out = Vector::with_capacity(ty, rg.row_count as usize);
        for (i, loc) in index.pages.iter().enumerate() {
            let ordinal = meta.first_page_ordinal + i as u32;
            let header_bytes = cur.take(loc.header_len as usize)?;
            let header_pt = open_module(
                cipher,
                file_id,
                ModuleType::PageHeader,
                ordinal,
                header_bytes,
                obs,
            )?;
            let header = PageHeader::decode(&header_pt)?;
            if header.data_ordinal != ordinal || header.value_count != loc.value_count {
                return Err(StoreError::Format(format!(
                    "page header {ordinal} disagrees with column index"
                )));
            }
            let page = cur.take(loc.data_len as usize)?;
            let payload = match self.footer.encryption_mode {
                EncryptionMode::GcmCtrPages => {
                    let expected = header
                        .page_hash
                        .ok_or_else(|| StoreError::Format("CTR page without hash".into()))?;
                    let actual: [u8; 32] = Sha256::digest(page).into();
                    if actual != expected {
                        return Err(StoreError::ChecksumMismatch(ordinal));
                    }
                    if page.len() < NONCE_LEN {
                        return Err(StoreError::Format("data page shorter than nonce".into()));
                    }
                    let nonce: [u8; NONCE_LEN] = page[..NONCE_LEN].try_into().unwrap();
                    let mut buf = page[NONCE_LEN..].to_vec();
                    cipher
                        .expect("encrypted file has a cipher")
                        .ctr_in_place(&ctr_block(&nonce), &mut buf);
                    obs.decrypted(buf.len() as u64);
                    buf
                }
                _ => open_module(cipher, file_id, ModuleType::DataPage, ordinal, page, obs)?,
            };
            if payload.len() != header.compressed_len as usize {
                return Err(StoreError::Format(format!(
                    "data page {ordinal} length disagrees with header"
                )));
            }
            let raw = decompress_page(
                &payload,
                self.footer.codec,
                header.uncompressed_len as usize,
            )?;
            if self.footer.codec != CodecKind::Uncompressed {
                obs.decompressed(raw.len() as u64);
            }
            decode_values(&raw, ty, header.value_count as usize, &mut out)?;
        }
        if cur.pos != chunk.len() {
            return Err(StoreError::Format("trailing bytes in column chunk".into()));
        }
        if out.len() as u64 != rg.row_count {
            return Err(StoreError::Format(
                "column chunk value count disagrees with row group".into(),
            ));
        }
        Ok(out)
    }

    pub fn scan(&self, column: &str, batch_rows: usize) -> Result<ColumnScan<'_>, StoreError> {
        Self {
            file: self.file,
            footer: self.footer.clone(),
            cipher: self.cipher.clone(),
            read_chunk: self.read_chunk,
        }
        .into_scan(column, batch_rows)
    }

    pub fn into_scan(self, column: &str, batch_rows: usize) -> Result<ColumnScan<'a>, StoreError> {
        let col = self
            .footer
            .column_index(column)
            .ok_or_else(|| StoreError::Schema(format!("unknown column {column}")))?;
        if batch_rows == 0 {
            return Err(StoreError::Config("batch_rows must be positive".into()));
        }
        let pending = Vector::empty(self.footer.schema[col].ty);
        Ok(ColumnScan {
            reader: self,
            col,
            batch_rows,
            next_rg: 0,
            pending,
            pos: 0,
            counters: ScanCounters::default(),
            failed: false,
        })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        if self.buf.len() - self.pos < n {
            return Err(StoreError::Format("column chunk truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

fn open_module(
    cipher: Option<&Cipher>,
    file_id: [u8; 8],
    module_type: ModuleType,
    ordinal: u32,
    bytes: &[u8],
    obs: &mut dyn ScanObserver,
) -> Result<Vec<u8>, StoreError> {
    let Some(cipher) = cipher else {
        return Ok(bytes.to_vec());
    };
    if bytes.len() < NONCE_LEN + TAG_LEN {
        return Err(StoreError::Format(format!(
            "{module_type:?} module shorter than nonce and tag"
        )));
    }
    let nonce: [u8; NONCE_LEN] = bytes[..NONCE_LEN].try_into().unwrap();
    let tag: [u8; TAG_LEN] = bytes[bytes.len() - TAG_LEN..].try_into().unwrap();
    let mut buf = bytes[NONCE_LEN..bytes.len() - TAG_LEN].to_vec();
    let aad = ModuleDescriptor {
        file_id,
        module_type,
        ordinal,
    }
    .aad();
    cipher
        .open_in_place(&nonce, &aad, &mut buf, &tag)
        .map_err(|_| StoreError::Authentication(module_type))?;
    obs.decrypted(buf.len() as u64);
    Ok(buf)
}

fn decode_values(
    raw: &[u8],
    ty: LogicalType,
    count: usize,
    out: &mut Vector,
) -> Result<(), StoreError> {
    let fixed = |w: usize| {
        if raw.len() == count * w {
            Ok(())
        } else {
            Err(StoreError::Format(format!(
                "page holds {} bytes, expected {}",
                raw.len(),
                count * w
            )))
        }
    };
    match (ty, out) {
        (LogicalType::Int64, Vector::Int64(v)) => {
            fixed(8)?;
            v.extend(
                raw.chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().unwrap())),
            );
        }
        (LogicalType::Float64, Vector::Float64(v)) => {
            fixed(8)?;
            v.extend(
                raw.chunks_exact(8)
                    .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap()))),
            );
        }
        (LogicalType::Date, Vector::Date(v)) => {
            fixed(4)?;
            v.extend(
                raw.chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap())),
            );
        }
        (LogicalType::FixedString(width), Vector::Str(v)) => decode_strings(raw, width, count, v)?,
        _ => unreachable!("output vector built from the column type"),
    }
    Ok(())
}

fn decode_strings(raw: &[u8], width: u8, count: usize, out: &mut StrVec) -> Result<(), StoreError> {
    let mut pos = 0;
    for _ in 0..count {
        let n = *raw
            .get(pos)
            .ok_or_else(|| StoreError::Format("string page truncated".into()))?
            as usize;
        let s = raw
            .get(pos + 1..pos + 1 + n)
            .ok_or_else(|| StoreError::Format("string page truncated".into()))?;
        if n > width as usize || std::str::from_utf8(s).is_err() {
            return Err(StoreError::Format("invalid string value".into()));
        }
        out.push_bytes(s);
        pos += 1 + n;
    }
    if pos != raw.len() {
        return Err(StoreError::Format("trailing bytes in string page".into()));
    }
    Ok(())
}

/// Iterator over the batches of one column. Counters accumulate as it runs.
pub struct ColumnScan<'a> {
    reader: FileReader<'a>,
    col: usize,
    batch_rows: usize,
    next_rg: usize,
    pending: Vector,
    pos: usize,
    counters: ScanCounters,
    failed: bool,
}

impl ColumnScan<'_> {
    pub fn counters(&self) -> ScanCounters {
        self.counters
    }

    /// Drains the scan into a single vector.
    pub fn collect_column(mut self) -> Result<(Vector, ScanCounters), StoreError> {
        let mut out = Vector::empty(self.reader.footer.schema[self.col].ty);
        for b in self.by_ref() {
            out.append(&b?.columns[0]);
        }
        Ok((out, self.counters))
    }
}

impl Iterator for ColumnScan<'_> {
    type Item = Result<Batch, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        while self.pending.len() - self.pos < self.batch_rows
            && self.next_rg < self.reader.num_row_groups()
        {
            match self
                .reader
                .read_column_chunk(self.next_rg, self.col, &mut self.counters)
            {
                Ok(v) => {
                    if self.pos > 0 {
                        self.pending = self.pending.slice(self.pos, self.pending.len());
                        self.pos = 0;
                    }
                    self.pending.append(&v);
                    self.next_rg += 1;
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        let end = (self.pos + self.batch_rows).min(self.pending.len());
        if end == self.pos {
            return None;
        }
        let batch = Batch::new(vec![self.pending.slice(self.pos, end)]);
        self.pos = end;
        Some(Ok(batch))
    }
}

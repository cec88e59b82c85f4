//! Columnar value vectors and batches shared by the store and the engine.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalType {
    Int64,
    Float64,
    /// Days since 1970-01-01.
    Date,
    /// UTF-8 string of at most `width` bytes.
    FixedString(u8),
}

impl LogicalType {
    /// Plain-encoded size of one value; strings report their maximum.
    pub fn max_encoded_width(self) -> usize {
        match self {
            LogicalType::Int64 | LogicalType::Float64 => 8,
            LogicalType::Date => 4,
            LogicalType::FixedString(w) => 1 + w as usize,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, LogicalType::Int64 | LogicalType::Float64)
    }
}

impl fmt::Display for LogicalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicalType::Int64 => f.write_str("int64"),
            LogicalType::Float64 => f.write_str("float64"),
            LogicalType::Date => f.write_str("date"),
            LogicalType::FixedString(w) => write!(f, "string({w})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub ty: LogicalType,
}

impl Field {
    pub fn new(name: impl Into<String>, ty: LogicalType) -> Self {
        Self {
            name: name.into(),
            ty,
        }
    }
}

/// A single value. There are no nulls in this engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Date(i32),
    Str(String),
}

impl Scalar {
    pub fn logical_type(&self) -> LogicalType {
        match self {
            Scalar::Int(_) => LogicalType::Int64,
            Scalar::Float(_) => LogicalType::Float64,
            Scalar::Date(_) => LogicalType::Date,
            Scalar::Str(s) => LogicalType::FixedString(s.len().min(255) as u8),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Int(v) => Some(*v as f64),
            Scalar::Float(v) => Some(*v),
            Scalar::Date(v) => Some(*v as f64),
            Scalar::Str(_) => None,
        }
    }

    /// Total order used for sorting and comparisons between compatible
    /// values; numeric kinds compare by value.
    pub fn total_cmp(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Int(a), Scalar::Int(b)) => a.cmp(b),
            (Scalar::Date(a), Scalar::Date(b)) => a.cmp(b),
            (Scalar::Str(a), Scalar::Str(b)) => a.cmp(b),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                _ => a.kind_rank().cmp(&b.kind_rank()),
            },
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Scalar::Int(_) | Scalar::Float(_) => 0,
            Scalar::Date(_) => 1,
            Scalar::Str(_) => 2,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Float(v) => write!(f, "{v}"),
            Scalar::Date(d) => f.write_str(&format_date(*d)),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

/// Days since epoch for a proleptic Gregorian date.
pub fn date_from_ymd(y: i32, m: u32, d: u32) -> i32 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy as i32;
    era * 146097 + doe - 719468
}

pub fn ymd_from_date(days: i32) -> (i32, u32, u32) {
    let z = days + 719468;
    let era = z.div_euclid(146097);
    let doe = z - era * 146097;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

pub fn format_date(days: i32) -> String {
    let (y, m, d) = ymd_from_date(days);
    format!("{y:04}-{m:02}-{d:02}")
}

pub fn parse_date(s: &str) -> Option<i32> {
    let mut it = s.splitn(3, '-');
    let y = it.next()?.parse().ok()?;
    let m = it.next()?.parse().ok()?;
    let d = it.next()?.parse().ok()?;
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    Some(date_from_ymd(y, m, d))
}

/// Variable-length strings stored back to back with `len + 1` offsets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StrVec {
    offsets: Vec<u32>,
    data: Vec<u8>,
}

impl StrVec {
    pub fn new() -> Self {
        Self {
            offsets: vec![0],
            data: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, bytes: usize) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        Self {
            offsets,
            data: Vec::with_capacity(bytes),
        }
    }

    pub fn push(&mut self, s: &str) {
        self.push_bytes(s.as_bytes());
    }

    pub(crate) fn push_bytes(&mut self, b: &[u8]) {
        self.data.extend_from_slice(b);
        self.offsets.push(self.data.len() as u32);
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &str {
        std::str::from_utf8(self.get_bytes(i)).expect("strings are validated on construction")
    }

    pub fn get_bytes(&self, i: usize) -> &[u8] {
        &self.data[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn data_len(&self) -> usize {
        self.data.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

impl<S: AsRef<str>> FromIterator<S> for StrVec {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut v = StrVec::new();
        for s in iter {
            v.push(s.as_ref());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Vector {
    Int64(Vec<i64>),
    Float64(Vec<f64>),
    Date(Vec<i32>),
    Str(StrVec),
}

impl Vector {
    pub fn empty(ty: LogicalType) -> Self {
        Self::with_capacity(ty, 0)
    }

    pub fn with_capacity(ty: LogicalType, n: usize) -> Self {
        match ty {
            LogicalType::Int64 => Vector::Int64(Vec::with_capacity(n)),
            LogicalType::Float64 => Vector::Float64(Vec::with_capacity(n)),
            LogicalType::Date => Vector::Date(Vec::with_capacity(n)),
            LogicalType::FixedString(_) => Vector::Str(StrVec::with_capacity(n, n * 8)),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Vector::Int64(v) => v.len(),
            Vector::Float64(v) => v.len(),
            Vector::Date(v) => v.len(),
            Vector::Str(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Storage footprint in bytes, used for memory accounting.
    pub fn byte_size(&self) -> usize {
        match self {
            Vector::Int64(v) => v.len() * 8,
            Vector::Float64(v) => v.len() * 8,
            Vector::Date(v) => v.len() * 4,
            Vector::Str(v) => v.data_len() + 4 * (v.len() + 1),
        }
    }

    pub fn get(&self, i: usize) -> Scalar {
        match self {
            Vector::Int64(v) => Scalar::Int(v[i]),
            Vector::Float64(v) => Scalar::Float(v[i]),
            Vector::Date(v) => Scalar::Date(v[i]),
            Vector::Str(v) => Scalar::Str(v.get(i).to_owned()),
        }
    }

    pub fn push(&mut self, s: &Scalar) {
        match (self, s) {
            (Vector::Int64(v), Scalar::Int(x)) => v.push(*x),
            (Vector::Float64(v), Scalar::Float(x)) => v.push(*x),
            (Vector::Float64(v), Scalar::Int(x)) => v.push(*x as f64),
            (Vector::Date(v), Scalar::Date(x)) => v.push(*x),
            (Vector::Str(v), Scalar::Str(x)) => v.push(x),
            (v, s) => panic!("cannot push {s:?} into {:?} vector", v.kind_name()),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Vector::Int64(_) => "int64",
            Vector::Float64(_) => "float64",
            Vector::Date(_) => "date",
            Vector::Str(_) => "string",
        }
    }

    pub fn gather(&self, idx: &[u32]) -> Vector {
        match self {
            Vector::Int64(v) => Vector::Int64(idx.iter().map(|&i| v[i as usize]).collect()),
            Vector::Float64(v) => Vector::Float64(idx.iter().map(|&i| v[i as usize]).collect()),
            Vector::Date(v) => Vector::Date(idx.iter().map(|&i| v[i as usize]).collect()),
            Vector::Str(v) => {
                let mut out = StrVec::with_capacity(idx.len(), idx.len() * 8);
                for &i in idx {
                    out.push_bytes(v.get_bytes(i as usize));
                }
                Vector::Str(out)
            }
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> Vector {
        match self {
            Vector::Int64(v) => Vector::Int64(v[start..end].to_vec()),
            Vector::Float64(v) => Vector::Float64(v[start..end].to_vec()),
            Vector::Date(v) => Vector::Date(v[start..end].to_vec()),
            Vector::Str(v) => {
                let mut out = StrVec::with_capacity(end - start, 0);
                for i in start..end {
                    out.push_bytes(v.get_bytes(i));
                }
                Vector::Str(out)
            }
        }
    }

    pub fn append(&mut self, other: &Vector) {
        match (self, other) {
            (Vector::Int64(a), Vector::Int64(b)) => a.extend_from_slice(b),
            (Vector::Float64(a), Vector::Float64(b)) => a.extend_from_slice(b),
            (Vector::Date(a), Vector::Date(b)) => a.extend_from_slice(b),
            (Vector::Str(a), Vector::Str(b)) => {
                for i in 0..b.len() {
                    a.push_bytes(b.get_bytes(i));
                }
            }
            (a, b) => panic!("cannot append {} to {}", b.kind_name(), a.kind_name()),
        }
    }
}

/// A slice of rows in columnar form with an optional selection vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub columns: Vec<Vector>,
    len: usize,
    selection: Option<Vec<u32>>,
}

impl Batch {
    /// Panics if the columns disagree on length.
    pub fn new(columns: Vec<Vector>) -> Self {
        let len = columns.first().map_or(0, Vector::len);
        assert!(
            columns.iter().all(|c| c.len() == len),
            "batch columns differ in length"
        );
        Self {
            columns,
            len,
            selection: None,
        }
    }

    /// A batch with no columns but a row count (e.g. for `COUNT(*)` inputs).
    pub fn with_len(columns: Vec<Vector>, len: usize) -> Self {
        assert!(
            columns.iter().all(|c| c.len() == len),
            "batch columns differ in length"
        );
        Self {
            columns,
            len,
            selection: None,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.active_count() == 0
    }

    pub fn selection(&self) -> Option<&[u32]> {
        self.selection.as_deref()
    }

    /// Panics unless indices are strictly increasing and in range.
    pub fn set_selection(&mut self, sel: Vec<u32>) {
        assert!(
            sel.windows(2).all(|w| w[0] < w[1]),
            "selection must be strictly increasing"
        );
        assert!(
            sel.last().is_none_or(|&i| (i as usize) < self.len),
            "selection out of range"
        );
        self.selection = Some(sel);
    }

    pub fn active_count(&self) -> usize {
        self.selection.as_ref().map_or(self.len, Vec::len)
    }

    /// Row indices that are currently selected.
    pub fn active_rows(&self) -> Vec<u32> {
        match &self.selection {
            Some(s) => s.clone(),
            None => (0..self.len as u32).collect(),
        }
    }

    /// Materializes the selection so every row is active.
    pub fn compact(self) -> Batch {
        match self.selection {
            None => self,
            Some(sel) => {
                let columns = self.columns.iter().map(|c| c.gather(&sel)).collect();
                Batch::with_len(columns, sel.len())
            }
        }
    }

    pub fn byte_size(&self) -> usize {
        self.columns.iter().map(Vector::byte_size).sum()
    }
}

/// An in-memory table: the writer's input and the oracle's data source.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Vec<Field>,
    pub columns: Vec<Vector>,
}

impl Table {
    pub fn new(schema: Vec<Field>, columns: Vec<Vector>) -> Self {
        Self { schema, columns }
    }

    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, Vector::len)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Vector> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    pub fn row(&self, i: usize) -> Vec<Scalar> {
        self.columns.iter().map(|c| c.get(i)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<Scalar>> {
        (0..self.num_rows()).map(|i| self.row(i)).collect()
    }

    /// Builds a table from row-major values; `schema` fixes the column types.
    pub fn from_rows(schema: Vec<Field>, rows: &[Vec<Scalar>]) -> Self {
        let mut columns: Vec<Vector> = schema
            .iter()
            .map(|f| Vector::with_capacity(f.ty, rows.len()))
            .collect();
        for r in rows {
            for (c, v) in columns.iter_mut().zip(r) {
                c.push(v);
            }
        }
        Self { schema, columns }
    }
}

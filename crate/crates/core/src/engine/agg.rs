//! Two-phase hash aggregation.
//!
//! Phase 1 reduces duplicates in a small fixed-size table per worker. When
//! the table reaches 75% fill its entries are scattered into radix
//! partitions by the high hash bits and the table is cleared. Phase 2 merges
//! each partition in a growing table; whole partitions go to one thread.

use std::cmp::Ordering;

use super::eval::eval_value;
use super::hash::{encode_row, hash_bytes, KeyTable};
use super::mem::{Handle, MemTracker};
use super::plan::{AggFunc, Aggregate, Expr, PlanError};
use crate::sim::AccessKind;
use crate::vector::{Batch, Field, LogicalType, Scalar, Table, Vector};

/// Bytes per partition buffer block in the memory model.
const BLOCK_BYTES: u64 = 64 << 10;
/// Modeled footprint of one aggregate state.
const STATE_BYTES: u64 = 16;
const PHASE2_INITIAL_SLOTS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum AggState {
    Int(i64),
    Float(f64),
    Count(i64),
    MinMax(Option<Scalar>),
    AvgInt(i64, i64),
    AvgFloat(f64, i64),
}

impl AggState {
    fn init(func: AggFunc, arg: Option<LogicalType>) -> AggState {
        match (func, arg) {
            (AggFunc::Count, _) => AggState::Count(0),
            (AggFunc::Sum, Some(LogicalType::Int64)) => AggState::Int(0),
            (AggFunc::Sum, _) => AggState::Float(0.0),
            (AggFunc::Min | AggFunc::Max, _) => AggState::MinMax(None),
            (AggFunc::Avg, Some(LogicalType::Int64)) => AggState::AvgInt(0, 0),
            (AggFunc::Avg, _) => AggState::AvgFloat(0.0, 0),
        }
    }

    fn update(&mut self, func: AggFunc, arg: Option<&Vector>, i: usize) {
        match (self, arg) {
            (AggState::Count(n), _) => *n += 1,
            (AggState::Int(s), Some(Vector::Int64(v))) => *s = s.wrapping_add(v[i]),
            (AggState::Float(s), Some(Vector::Float64(v))) => *s += v[i],
            (AggState::AvgInt(s, n), Some(Vector::Int64(v))) => {
                *s = s.wrapping_add(v[i]);
                *n += 1;
            }
            (AggState::AvgFloat(s, n), Some(Vector::Float64(v))) => {
                *s += v[i];
                *n += 1;
            }
            (AggState::MinMax(cur), Some(v)) => {
                let better = match cur {
                    None => true,
                    Some(c) => {
                        let ord = match (v, &*c) {
                            (Vector::Str(s), Scalar::Str(c)) => s.get_bytes(i).cmp(c.as_bytes()),
                            (Vector::Int64(x), Scalar::Int(c)) => x[i].cmp(c),
                            (Vector::Date(x), Scalar::Date(c)) => x[i].cmp(c),
                            (Vector::Float64(x), Scalar::Float(c)) => x[i].total_cmp(c),
                            _ => unreachable!("min/max state type follows its argument"),
                        };
                        ord == if func == AggFunc::Min {
                            Ordering::Less
                        } else {
                            Ordering::Greater
                        }
                    }
                };
                if better {
                    *cur = Some(v.get(i));
                }
            }
            _ => unreachable!("aggregate state does not match argument type"),
        }
    }

    fn merge(&mut self, func: AggFunc, other: &AggState) {
        match (self, other) {
            (AggState::Count(a), AggState::Count(b)) => *a += b,
            (AggState::Int(a), AggState::Int(b)) => *a = a.wrapping_add(*b),
            (AggState::Float(a), AggState::Float(b)) => *a += b,
            (AggState::AvgInt(a, n), AggState::AvgInt(b, m)) => {
                *a = a.wrapping_add(*b);
                *n += m;
            }
            (AggState::AvgFloat(a, n), AggState::AvgFloat(b, m)) => {
                *a += b;
                *n += m;
            }
            (AggState::MinMax(a), AggState::MinMax(b)) => {
                if let Some(b) = b {
                    let take = match a {
                        None => true,
                        Some(a) => {
                            let ord = b.total_cmp(a);
                            ord == if func == AggFunc::Min {
                                Ordering::Less
                            } else {
                                Ordering::Greater
                            }
                        }
                    };
                    if take {
                        *a = Some(b.clone());
                    }
                }
            }
            _ => unreachable!("merging mismatched aggregate states"),
        }
    }

    pub fn finalize(&self) -> Scalar {
        match self {
            AggState::Int(v) | AggState::Count(v) => Scalar::Int(*v),
            AggState::Float(v) => Scalar::Float(*v),
            AggState::MinMax(v) => v.clone().expect("a group holds at least one row"),
            AggState::AvgInt(s, n) => Scalar::Float(*s as f64 / *n as f64),
            AggState::AvgFloat(s, n) => Scalar::Float(*s / *n as f64),
        }
    }

    /// Partial row count carried by a COUNT state.
    pub fn count(&self) -> Option<i64> {
        match self {
            AggState::Count(n) => Some(*n),
            _ => None,
        }
    }
}

/// Partition index of a hash: its top `bits` bits. Slot indexes use the low
/// bits, so the two never overlap.
pub fn partition_of(hash: u64, bits: u32) -> usize {
    hash.checked_shr(64 - bits).unwrap_or(0) as usize
}

/// A resolved aggregation: key columns, argument expressions and output schema.
#[derive(Debug, Clone)]
pub struct AggLayout {
    input_schema: Vec<Field>,
    key_index: Vec<usize>,
    key_types: Vec<LogicalType>,
    funcs: Vec<AggFunc>,
    args: Vec<Option<Expr>>,
    arg_types: Vec<Option<LogicalType>>,
    pub output_schema: Vec<Field>,
}

impl AggLayout {
    pub fn new(
        schema: &[Field],
        group_by: &[String],
        aggregates: &[Aggregate],
    ) -> Result<Self, PlanError> {
        let mut key_index = Vec::new();
        let mut output_schema = Vec::new();
        for g in group_by {
            let i = schema
                .iter()
                .position(|f| &f.name == g)
                .ok_or_else(|| PlanError::UnknownColumn(g.clone()))?;
            key_index.push(i);
            output_schema.push(schema[i].clone());
        }
        let mut arg_types = Vec::new();
        for a in aggregates {
            output_schema.push(Field::new(a.name.clone(), a.output_type(schema)?));
            arg_types.push(a.arg.as_ref().map(|e| e.value_type(schema)).transpose()?);
        }
        Ok(Self {
            input_schema: schema.to_vec(),
            key_types: key_index.iter().map(|&i| schema[i].ty).collect(),
            key_index,
            funcs: aggregates.iter().map(|a| a.func).collect(),
            args: aggregates.iter().map(|a| a.arg.clone()).collect(),
            arg_types,
            output_schema,
        })
    }

    pub fn agg_count(&self) -> usize {
        self.funcs.len()
    }

    fn key_width(&self) -> u64 {
        self.key_types
            .iter()
            .map(|t| t.max_encoded_width() as u64)
            .sum()
    }

    fn entry_width(&self) -> u64 {
        8 + self.key_width() + STATE_BYTES * self.funcs.len() as u64
    }

    fn init_states(&self, out: &mut Vec<AggState>) {
        for (f, t) in self.funcs.iter().zip(&self.arg_types) {
            out.push(AggState::init(*f, *t));
        }
    }

    /// Key columns and aggregate arguments over the active rows of `batch`.
    fn inputs(&self, batch: &Batch) -> (Vec<Vector>, Vec<Option<Vector>>, usize) {
        let sel = batch.active_rows();
        let keys = self
            .key_index
            .iter()
            .map(|&i| {
                eval_value(
                    &Expr::Col(self.input_schema[i].name.clone()),
                    &self.input_schema,
                    batch,
                    &sel,
                )
            })
            .collect();
        let args = self
            .args
            .iter()
            .map(|a| {
                a.as_ref()
                    .map(|e| eval_value(e, &self.input_schema, batch, &sel))
            })
            .collect();
        (keys, args, sel.len())
    }

    /// Appends the decoded key of `bytes` to the output key columns.
    fn decode_key(&self, mut bytes: &[u8], out: &mut [Vector]) {
        for (t, col) in self.key_types.iter().zip(out) {
            match (t, col) {
                (LogicalType::Int64, Vector::Int64(v)) => {
                    v.push(i64::from_le_bytes(bytes[..8].try_into().unwrap()));
                    bytes = &bytes[8..];
                }
                (LogicalType::Float64, Vector::Float64(v)) => {
                    v.push(f64::from_bits(u64::from_le_bytes(
                        bytes[..8].try_into().unwrap(),
                    )));
                    bytes = &bytes[8..];
                }
                (LogicalType::Date, Vector::Date(v)) => {
                    v.push(i32::from_le_bytes(bytes[..4].try_into().unwrap()));
                    bytes = &bytes[4..];
                }
                (LogicalType::FixedString(_), Vector::Str(v)) => {
                    let n = bytes[0] as usize;
                    v.push_bytes(&bytes[1..1 + n]);
                    bytes = &bytes[1 + n..];
                }
                _ => unreachable!("key column type follows layout"),
            }
        }
    }
}

/// Entries of one radix partition, append-only.
#[derive(Debug, Clone, Default)]
pub struct PartitionBuffer {
    hashes: Vec<u64>,
    key_offsets: Vec<u32>,
    key_data: Vec<u8>,
    states: Vec<AggState>,
    blocks: Vec<Handle>,
    block_used: u64,
}

impl PartitionBuffer {
    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn hash(&self, i: usize) -> u64 {
        self.hashes[i]
    }

    pub fn key(&self, i: usize) -> &[u8] {
        let start = if i == 0 {
            0
        } else {
            self.key_offsets[i - 1] as usize
        };
        &self.key_data[start..self.key_offsets[i] as usize]
    }

    pub fn states(&self, i: usize, naggs: usize) -> &[AggState] {
        &self.states[i * naggs..(i + 1) * naggs]
    }

    fn push(&mut self, hash: u64, key: &[u8], states: &[AggState]) {
        self.hashes.push(hash);
        self.key_data.extend_from_slice(key);
        self.key_offsets.push(self.key_data.len() as u32);
        self.states.extend_from_slice(states);
    }

    fn record_append(&mut self, mut bytes: u64, mem: &mut MemTracker) {
        if !mem.enabled() {
            return;
        }
        while bytes > 0 {
            if self.blocks.is_empty() || self.block_used == BLOCK_BYTES {
                self.blocks.push(mem.alloc(BLOCK_BYTES));
                self.block_used = 0;
            }
            let n = bytes.min(BLOCK_BYTES - self.block_used);
            let b = *self.blocks.last().unwrap();
            mem.touch(b, self.block_used, n, AccessKind::SequentialWrite);
            self.block_used += n;
            bytes -= n;
        }
    }
}

/// Phase-1 output: one buffer per radix partition.
#[derive(Debug, Clone)]
pub struct RadixPartitionSet {
    pub partition_bits: u32,
    pub partitions: Vec<PartitionBuffer>,
    naggs: usize,
}

impl RadixPartitionSet {
    pub fn new(partition_bits: u32, naggs: usize) -> Self {
        assert!(partition_bits <= 16, "at most 16 partition bits");
        Self {
            partition_bits,
            partitions: vec![PartitionBuffer::default(); 1 << partition_bits],
            naggs,
        }
    }

    pub fn agg_count(&self) -> usize {
        self.naggs
    }

    pub fn total_entries(&self) -> usize {
        self.partitions.iter().map(PartitionBuffer::len).sum()
    }

    /// Appends every partition of `other` after the matching one of `self`.
    pub fn absorb(&mut self, other: RadixPartitionSet) {
        assert_eq!(self.partition_bits, other.partition_bits);
        for (mine, theirs) in self.partitions.iter_mut().zip(other.partitions) {
            if mine.is_empty() && mine.blocks.is_empty() {
                *mine = theirs;
                continue;
            }
            for i in 0..theirs.len() {
                mine.push(theirs.hash(i), theirs.key(i), theirs.states(i, self.naggs));
            }
            mine.blocks.extend(theirs.blocks);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PreAggStats {
    pub rows: u64,
    pub flushes: u64,
    pub entries_emitted: u64,
}

/// The fixed-size phase-1 table of one worker.
pub struct PreAggTable<'l> {
    layout: &'l AggLayout,
    table: KeyTable,
    states: Vec<AggState>,
    seed: u64,
    region: Handle,
    region_bytes: u64,
    key_buf: Vec<u8>,
    slot_probes: Vec<u64>,
    entry_probes: Vec<u64>,
    pub stats: PreAggStats,
}

impl<'l> PreAggTable<'l> {
    pub fn new(layout: &'l AggLayout, slot_count: usize, seed: u64, mem: &mut MemTracker) -> Self {
        let table = KeyTable::with_slots(slot_count);
        let region_bytes =
            slot_count as u64 * 4 + (slot_count as u64 * 3 / 4 + 1) * layout.entry_width();
        Self {
            layout,
            table,
            states: Vec::new(),
            seed,
            region: mem.alloc(region_bytes),
            region_bytes,
            key_buf: Vec::new(),
            slot_probes: Vec::new(),
            entry_probes: Vec::new(),
            stats: PreAggStats::default(),
        }
    }

    pub fn slot_count(&self) -> usize {
        self.table.slot_count()
    }

    pub fn fill(&self) -> usize {
        self.table.len()
    }

    pub fn add_batch(&mut self, batch: &Batch, out: &mut RadixPartitionSet, mem: &mut MemTracker) {
        let (keys, args, n) = self.layout.inputs(batch);
        let key_refs: Vec<&Vector> = keys.iter().collect();
        let naggs = self.layout.agg_count();
        let width = self.layout.entry_width();
        let kind = mem.probe_kind(self.region_bytes, true);
        let entries_base = self.table.slot_count() as u64 * 4;
        for i in 0..n {
            self.key_buf.clear();
            encode_row(&key_refs, i, &mut self.key_buf);
            let h = hash_bytes(self.seed, &self.key_buf);
            let (e, inserted, slot) = self.table.find_or_insert(h, &self.key_buf);
            if inserted {
                self.layout.init_states(&mut self.states);
            }
            for (a, st) in self.states[e * naggs..(e + 1) * naggs]
                .iter_mut()
                .enumerate()
            {
                st.update(self.layout.funcs[a], args[a].as_ref(), i);
            }
            if mem.enabled() {
                self.slot_probes.push(slot as u64 * 4);
                self.entry_probes.push(entries_base + e as u64 * width);
            }
            if self.table.is_full() {
                self.probe_events(mem, kind);
                self.flush(out, mem);
            }
        }
        self.stats.rows += n as u64;
        self.probe_events(mem, kind);
    }

    fn probe_events(&mut self, mem: &mut MemTracker, kind: AccessKind) {
        let width = self.layout.entry_width();
        mem.probe(
            self.region,
            self.region_bytes,
            &mut self.slot_probes,
            4,
            kind,
        );
        mem.probe(
            self.region,
            self.region_bytes,
            &mut self.entry_probes,
            width,
            kind,
        );
    }

    /// Scatters the table into `out` by radix and resets it.
    pub fn flush(&mut self, out: &mut RadixPartitionSet, mem: &mut MemTracker) {
        if self.table.is_empty() {
            return;
        }
        let naggs = self.layout.agg_count();
        let width = self.layout.entry_width();
        mem.read(self.region, self.table.len() as u64 * width);
        for e in 0..self.table.len() {
            let h = self.table.hash(e);
            let p = &mut out.partitions[partition_of(h, out.partition_bits)];
            p.push(
                h,
                self.table.key(e),
                &self.states[e * naggs..(e + 1) * naggs],
            );
            p.record_append(width, mem);
        }
        self.stats.flushes += 1;
        self.stats.entries_emitted += self.table.len() as u64;
        self.table.clear();
        self.states.clear();
    }

    /// Flushes what is left and releases the table.
    pub fn finish(mut self, out: &mut RadixPartitionSet, mem: &mut MemTracker) -> PreAggStats {
        self.flush(out, mem);
        mem.free(self.region);
        self.stats
    }
}

/// Runs phase 1 over `batches` on a single table.
pub fn preaggregate(
    batches: &[Batch],
    layout: &AggLayout,
    slot_count: usize,
    partition_bits: u32,
    seed: u64,
) -> (RadixPartitionSet, PreAggStats) {
    let mut mem = MemTracker::new(0, false, 0);
    let mut out = RadixPartitionSet::new(partition_bits, layout.agg_count());
    let mut t = PreAggTable::new(layout, slot_count, seed, &mut mem);
    for b in batches {
        t.add_batch(b, &mut out, &mut mem);
    }
    let stats = t.finish(&mut out, &mut mem);
    (out, stats)
}

/// Merges one partition into final groups, appended to `out` columns.
pub fn merge_partition(
    part: &PartitionBuffer,
    layout: &AggLayout,
    out: &mut [Vector],
    mem: &mut MemTracker,
) {
    let naggs = layout.agg_count();
    let width = layout.entry_width();
    for &b in &part.blocks {
        mem.read(b, BLOCK_BYTES);
        mem.free(b);
    }
    let table_bytes = |slots: usize| slots as u64 * 4 + (slots as u64 * 3 / 4 + 1) * width;
    let mut table = KeyTable::with_slots(PHASE2_INITIAL_SLOTS);
    let mut region_bytes = table_bytes(table.slot_count());
    let mut region = mem.alloc(region_bytes);
    let mut states: Vec<AggState> = Vec::new();
    let mut probes = Vec::new();
    for i in 0..part.len() {
        if table.is_full() {
            mem.probe(
                region,
                region_bytes,
                &mut probes,
                width,
                mem.probe_kind(region_bytes, true),
            );
            table.grow();
            let bytes = table_bytes(table.slot_count());
            let grown = mem.alloc(bytes);
            mem.read(region, region_bytes);
            mem.touch(grown, 0, bytes, mem.probe_kind(bytes, true));
            mem.free(region);
            region = grown;
            region_bytes = bytes;
        }
        let (e, inserted, slot) = table.find_or_insert(part.hash(i), part.key(i));
        let incoming = part.states(i, naggs);
        if inserted {
            states.extend_from_slice(incoming);
        } else {
            for (a, st) in states[e * naggs..(e + 1) * naggs].iter_mut().enumerate() {
                st.merge(layout.funcs[a], &incoming[a]);
            }
        }
        if mem.enabled() {
            probes.push(slot as u64 * 4);
            probes.push(table.slot_count() as u64 * 4 + e as u64 * width);
        }
    }
    mem.probe(
        region,
        region_bytes,
        &mut probes,
        width,
        mem.probe_kind(region_bytes, true),
    );
    let nkeys = layout.key_types.len();
    for e in 0..table.len() {
        layout.decode_key(table.key(e), &mut out[..nkeys]);
        for (a, st) in states[e * naggs..(e + 1) * naggs].iter().enumerate() {
            out[nkeys + a].push(&st.finalize());
        }
    }
    mem.read(region, table.len() as u64 * width);
    mem.free(region);
}

/// Runs phase 2: partition `p` is merged by thread `p % threads`. The result
/// lists partitions in index order.
pub fn partition_aggregate(set: &RadixPartitionSet, layout: &AggLayout, threads: usize) -> Table {
    let cols = merge_partitions(set, layout, threads, &mut [], 0, false);
    Table::new(
        layout.output_schema.clone(),
        cols.into_iter()
            .flatten()
            .reduce(concat)
            .unwrap_or_else(|| empty_columns(layout)),
    )
}

fn concat(mut a: Vec<Vector>, b: Vec<Vector>) -> Vec<Vector> {
    for (x, y) in a.iter_mut().zip(&b) {
        x.append(y);
    }
    a
}

pub(crate) fn empty_columns(layout: &AggLayout) -> Vec<Vector> {
    layout
        .output_schema
        .iter()
        .map(|f| Vector::empty(f.ty))
        .collect()
}

/// Merges every partition, returning per-partition columns in index order.
/// With `track`, worker `t` records into `trackers[t]`.
pub(crate) fn merge_partitions(
    set: &RadixPartitionSet,
    layout: &AggLayout,
    threads: usize,
    trackers: &mut [MemTracker],
    cache_resident_bytes: u64,
    track: bool,
) -> Vec<Option<Vec<Vector>>> {
    let threads = threads.max(1);
    let nparts = set.partitions.len();
    let run = |t: usize, mem: &mut MemTracker| -> Vec<(usize, Vec<Vector>)> {
        (t..nparts)
            .step_by(threads)
            .filter(|&p| !set.partitions[p].is_empty() || !set.partitions[p].blocks.is_empty())
            .map(|p| {
                let mut cols = empty_columns(layout);
                merge_partition(&set.partitions[p], layout, &mut cols, mem);
                (p, cols)
            })
            .collect()
    };
    let mut own: Vec<MemTracker>;
    let trackers = if track {
        trackers
    } else {
        own = (0..threads)
            .map(|t| MemTracker::new(t as u64, false, cache_resident_bytes))
            .collect();
        &mut own[..]
    };
    let parts: Vec<Vec<(usize, Vec<Vector>)>> = if threads == 1 {
        vec![run(0, &mut trackers[0])]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = trackers
                .iter_mut()
                .enumerate()
                .map(|(t, mem)| s.spawn(move || run(t, mem)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("aggregation worker panicked"))
                .collect()
        })
    };
    let mut out: Vec<Option<Vec<Vector>>> = vec![None; nparts];
    for (p, cols) in parts.into_iter().flatten() {
        out[p] = Some(cols);
    }
    out
}

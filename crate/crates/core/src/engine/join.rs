//! Inner equi-join: a chained hash table over the build side, probed batch
//! by batch. Matches come out probe-major, build rows in input order.

use super::hash::{encode_row, hash_bytes, KeyTable};
use super::mem::{Handle, MemTracker};
use crate::vector::{Batch, Vector};

const NONE: u32 = u32::MAX;

pub struct JoinTable {
    keys: KeyTable,
    head: Vec<u32>,
    next: Vec<u32>,
    columns: Vec<Vector>,
    seed: u64,
    region: Handle,
    region_bytes: u64,
    data: Handle,
    data_bytes: u64,
    row_width: u64,
    entry_width: u64,
}

impl JoinTable {
    /// Builds over the concatenated build-side `columns`; `data` is the
    /// tracked buffer holding them.
    pub fn build(
        columns: Vec<Vector>,
        key_index: &[usize],
        seed: u64,
        data: Handle,
        mem: &mut MemTracker,
    ) -> Self {
        let rows = columns.first().map_or(0, Vector::len);
        let slots = (rows * 4 / 3 + 1).next_power_of_two().max(16);
        let mut keys = KeyTable::with_slots(slots);
        let mut head = Vec::new();
        let mut next = vec![NONE; rows];
        let key_cols: Vec<&Vector> = key_index.iter().map(|&i| &columns[i]).collect();
        let mut buf = Vec::new();
        let key_width: u64 = 8 * key_index.len() as u64;
        let entry_width = 8 + key_width + 4;
        let region_bytes = slots as u64 * 4 + rows as u64 * (entry_width + 4);
        let region = mem.alloc(region_bytes);
        let kind = mem.probe_kind(region_bytes, true);
        let mut probes = Vec::new();
        for r in (0..rows).rev() {
            buf.clear();
            encode_row(&key_cols, r, &mut buf);
            let (e, inserted, slot) = keys.find_or_insert(hash_bytes(seed, &buf), &buf);
            if inserted {
                head.push(r as u32);
            } else {
                next[r] = head[e];
                head[e] = r as u32;
            }
            if mem.enabled() {
                probes.push(slot as u64 * 4);
                probes.push(slots as u64 * 4 + e as u64 * entry_width);
                if probes.len() >= 4096 {
                    mem.probe(region, region_bytes, &mut probes, entry_width, kind);
                }
            }
        }
        mem.probe(region, region_bytes, &mut probes, entry_width, kind);
        let data_bytes: u64 = columns.iter().map(|c| c.byte_size() as u64).sum();
        mem.read(data, data_bytes);
        Self {
            keys,
            head,
            next,
            row_width: if rows == 0 {
                0
            } else {
                data_bytes.div_ceil(rows as u64)
            },
            columns,
            seed,
            region,
            region_bytes,
            data,
            data_bytes,
            entry_width,
        }
    }

    pub fn build_rows(&self) -> usize {
        self.next.len()
    }

    pub fn distinct_keys(&self) -> usize {
        self.keys.len()
    }

    /// Joins the active rows of `batch` (keys at `probe_keys`), appending
    /// output batches of at most `capacity` rows to `out`.
    pub fn probe(
        &self,
        batch: &Batch,
        probe_keys: &[usize],
        capacity: usize,
        mem: &mut MemTracker,
        out: &mut Vec<Batch>,
    ) {
        let sel = batch.active_rows();
        let key_cols: Vec<&Vector> = probe_keys.iter().map(|&i| &batch.columns[i]).collect();
        let mut buf = Vec::new();
        let mut probe_rows: Vec<u32> = Vec::new();
        let mut build_rows: Vec<u32> = Vec::new();
        let table_kind = mem.probe_kind(self.region_bytes, false);
        let data_kind = mem.probe_kind(self.data_bytes, false);
        let slots = self.keys.slot_count() as u64;
        let mut table_probes = Vec::new();
        let mut data_probes = Vec::new();
        if self.next.is_empty() {
            return;
        }
        for &r in &sel {
            buf.clear();
            encode_row(&key_cols, r as usize, &mut buf);
            let (found, slot) = self.keys.find(hash_bytes(self.seed, &buf), &buf);
            if mem.enabled() {
                table_probes.push(slot as u64 * 4);
            }
            let Some(e) = found else { continue };
            if mem.enabled() {
                table_probes.push(slots * 4 + e as u64 * self.entry_width);
            }
            let mut b = self.head[e];
            while b != NONE {
                probe_rows.push(r);
                build_rows.push(b);
                if mem.enabled() {
                    data_probes.push(b as u64 * self.row_width);
                }
                b = self.next[b as usize];
                if probe_rows.len() == capacity {
                    self.emit(batch, &mut probe_rows, &mut build_rows, out);
                }
            }
        }
        mem.probe(
            self.region,
            self.region_bytes,
            &mut table_probes,
            self.entry_width,
            table_kind,
        );
        mem.probe(
            self.data,
            self.data_bytes,
            &mut data_probes,
            self.row_width,
            data_kind,
        );
        if !probe_rows.is_empty() {
            self.emit(batch, &mut probe_rows, &mut build_rows, out);
        }
    }

    fn emit(
        &self,
        batch: &Batch,
        probe_rows: &mut Vec<u32>,
        build_rows: &mut Vec<u32>,
        out: &mut Vec<Batch>,
    ) {
        let mut cols: Vec<Vector> = batch.columns.iter().map(|c| c.gather(probe_rows)).collect();
        cols.extend(self.columns.iter().map(|c| c.gather(build_rows)));
        out.push(Batch::new(cols));
        probe_rows.clear();
        build_rows.clear();
    }

    /// Releases the hash structure and build data.
    pub fn release(&self, mem: &mut MemTracker) {
        mem.free(self.region);
        mem.free(self.data);
    }
}

/// Joins `probe` with `build` on the given key column positions.
pub fn hash_join(
    build: &[Batch],
    probe: &[Batch],
    build_keys: &[usize],
    probe_keys: &[usize],
    capacity: usize,
    seed: u64,
) -> Vec<Batch> {
    let mut mem = MemTracker::new(0, false, 0);
    let Some(first) = build.first() else {
        return Vec::new();
    };
    let mut cols: Vec<Vector> = first.clone().compact().columns;
    for b in &build[1..] {
        for (c, v) in cols.iter_mut().zip(b.clone().compact().columns) {
            c.append(&v);
        }
    }
    let data = mem.alloc(0);
    let t = JoinTable::build(cols, build_keys, seed, data, &mut mem);
    let mut out = Vec::new();
    for b in probe {
        t.probe(b, probe_keys, capacity, &mut mem, &mut out);
    }
    out
}

//! Group/join key encoding, a seeded 64-bit hash and an open-addressing
//! table over encoded keys.

use crate::vector::Vector;

/// Appends the encoding of row `i` of every key column to `out`.
pub fn encode_row(cols: &[&Vector], i: usize, out: &mut Vec<u8>) {
    for c in cols {
        match c {
            Vector::Int64(v) => out.extend_from_slice(&v[i].to_le_bytes()),
            Vector::Float64(v) => out.extend_from_slice(&v[i].to_bits().to_le_bytes()),
            Vector::Date(v) => out.extend_from_slice(&v[i].to_le_bytes()),
            Vector::Str(v) => {
                let b = v.get_bytes(i);
                out.push(b.len() as u8);
                out.extend_from_slice(b);
            }
        }
    }
}

/// Encoded keys of `n` rows, back to back.
pub struct EncodedKeys {
    pub data: Vec<u8>,
    pub offsets: Vec<u32>,
}

impl EncodedKeys {
    pub fn encode(cols: &[&Vector], n: usize) -> Self {
        let mut data = Vec::with_capacity(n * 8 * cols.len());
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            encode_row(cols, i, &mut data);
            offsets.push(data.len() as u32);
        }
        Self { data, offsets }
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.data[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const K: u64 = 0x9e37_79b9_7f4a_7c15;

fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

pub fn hash_bytes(seed: u64, b: &[u8]) -> u64 {
    let mut h = seed ^ (b.len() as u64).wrapping_mul(K);
    let mut chunks = b.chunks_exact(8);
    for c in &mut chunks {
        let w = u64::from_le_bytes(c.try_into().unwrap());
        h = (h ^ fmix64(w)).rotate_left(27).wrapping_mul(K);
    }
    let rest = chunks.remainder();
    if !rest.is_empty() {
        let mut w = [0u8; 8];
        w[..rest.len()].copy_from_slice(rest);
        h = (h ^ fmix64(u64::from_le_bytes(w)))
            .rotate_left(27)
            .wrapping_mul(K);
    }
    fmix64(h)
}

const EMPTY: u32 = u32::MAX;

/// Open-addressing table with linear probing. The slot index is taken from
/// the low bits of the hash.
#[derive(Debug, Clone)]
pub struct KeyTable {
    slots: Vec<u32>,
    mask: u64,
    hashes: Vec<u64>,
    key_offsets: Vec<u32>,
    key_data: Vec<u8>,
}

impl KeyTable {
    /// `slot_count` must be a power of two.
    pub fn with_slots(slot_count: usize) -> Self {
        assert!(
            slot_count.is_power_of_two(),
            "slot count must be a power of two"
        );
        Self {
            slots: vec![EMPTY; slot_count],
            mask: slot_count as u64 - 1,
            hashes: Vec::new(),
            key_offsets: vec![0],
            key_data: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// True once the fill reaches 75% of the slots.
    pub fn is_full(&self) -> bool {
        self.len() * 4 >= self.slots.len() * 3
    }

    pub fn hash(&self, e: usize) -> u64 {
        self.hashes[e]
    }

    pub fn key(&self, e: usize) -> &[u8] {
        &self.key_data[self.key_offsets[e] as usize..self.key_offsets[e + 1] as usize]
    }

    pub fn key_bytes(&self) -> usize {
        self.key_data.len()
    }

    /// Looks `key` up, inserting it when absent. Returns (entry, inserted, slot).
    pub fn find_or_insert(&mut self, hash: u64, key: &[u8]) -> (usize, bool, usize) {
        let mut s = (hash & self.mask) as usize;
        loop {
            let e = self.slots[s];
            if e == EMPTY {
                let idx = self.hashes.len();
                self.slots[s] = idx as u32;
                self.hashes.push(hash);
                self.key_data.extend_from_slice(key);
                self.key_offsets.push(self.key_data.len() as u32);
                return (idx, true, s);
            }
            if self.hashes[e as usize] == hash && self.key(e as usize) == key {
                return (e as usize, false, s);
            }
            s = (s + 1) & self.mask as usize;
        }
    }

    /// Returns (entry, slot) when present.
    pub fn find(&self, hash: u64, key: &[u8]) -> (Option<usize>, usize) {
        let mut s = (hash & self.mask) as usize;
        loop {
            let e = self.slots[s];
            if e == EMPTY {
                return (None, s);
            }
            if self.hashes[e as usize] == hash && self.key(e as usize) == key {
                return (Some(e as usize), s);
            }
            s = (s + 1) & self.mask as usize;
        }
    }

    pub fn clear(&mut self) {
        self.slots.fill(EMPTY);
        self.hashes.clear();
        self.key_offsets.truncate(1);
        self.key_data.clear();
    }

    /// Doubles the slot array and re-inserts every entry.
    pub fn grow(&mut self) {
        let n = self.slots.len() * 2;
        self.slots = vec![EMPTY; n];
        self.mask = n as u64 - 1;
        for (e, &h) in self.hashes.iter().enumerate() {
            let mut s = (h & self.mask) as usize;
            while self.slots[s] != EMPTY {
                s = (s + 1) & self.mask as usize;
            }
            self.slots[s] = e as u32;
        }
    }
}

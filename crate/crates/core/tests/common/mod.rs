#![allow(dead_code)]

use std::collections::BTreeMap;

use confbench::crypto::{best_backend, AesKey};
use confbench::engine::{execute, EngineConfig, ExecStats, PlanNode, TableFile};
use confbench::sim::{AccessKind, AllocatorModel, RegionId, SimConfig, SimState, PAGE_SIZE};
use confbench::store::{write_table, CodecKind, EncryptionMode, WriteOptions};
use confbench::vector::Table;
use rand::Rng;

pub fn key() -> AesKey {
    AesKey::new(&[0x42; 16]).unwrap()
}

pub fn write_all(
    tables: &BTreeMap<String, Table>,
    codec: CodecKind,
    encrypted: bool,
    row_group_rows: usize,
) -> BTreeMap<String, Vec<u8>> {
    let mut opts = if encrypted {
        WriteOptions::encrypted(codec, EncryptionMode::GcmAll, key())
    } else {
        WriteOptions {
            codec,
            ..WriteOptions::default()
        }
    };
    opts.row_group_rows = row_group_rows;
    tables
        .iter()
        .map(|(n, t)| {
            (
                n.clone(),
                write_table(&t.schema, &t.columns, &opts).unwrap(),
            )
        })
        .collect()
}

pub fn open(files: &BTreeMap<String, Vec<u8>>, encrypted: bool) -> BTreeMap<String, TableFile<'_>> {
    files
        .iter()
        .map(|(n, b)| {
            let f = if encrypted {
                TableFile::encrypted(b, key(), best_backend())
            } else {
                TableFile::plain(b)
            };
            (n.clone(), f)
        })
        .collect()
}

pub fn run(
    plan: &PlanNode,
    files: &BTreeMap<String, Vec<u8>>,
    encrypted: bool,
    config: &EngineConfig,
) -> (Table, ExecStats) {
    execute(plan, &open(files, encrypted), config, None).unwrap()
}

/// Brute-force LRU: a plain vector ordered from least to most recently used.
pub struct LruOracle {
    pub capacity: usize,
    pub order: Vec<u32>,
    pub evictions: u64,
    pub loads: u64,
    seen: Vec<u32>,
}

impl LruOracle {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            order: Vec::new(),
            evictions: 0,
            loads: 0,
            seen: Vec::new(),
        }
    }

    fn use_page(&mut self, p: u32) -> bool {
        let hit = if let Some(i) = self.order.iter().position(|&q| q == p) {
            self.order.remove(i);
            true
        } else {
            false
        };
        self.order.push(p);
        while self.order.len() > self.capacity {
            self.order.remove(0);
            self.evictions += 1;
        }
        !hit
    }

    pub fn on_alloc(&mut self, pages: &[u32], allocator: AllocatorModel) {
        for &p in pages {
            let fresh = !self.seen.contains(&p);
            if fresh {
                self.seen.push(p);
            }
            if allocator == AllocatorModel::MapHeavy || fresh {
                self.use_page(p);
            }
        }
    }

    pub fn on_free(&mut self, pages: &[u32], allocator: AllocatorModel) {
        if allocator == AllocatorModel::MapHeavy {
            for p in pages {
                if let Some(i) = self.order.iter().position(|q| q == p) {
                    self.order.remove(i);
                    self.evictions += 1;
                }
            }
        }
    }

    pub fn on_touch(&mut self, pages: &[u32]) {
        for &p in pages {
            if self.use_page(p) {
                self.loads += 1;
            }
        }
    }
}

/// Runs one random alloc/free/touch sequence against both the simulator and
/// the oracle, comparing residency after every step. Returns the number of
/// operations executed.
pub fn lru_oracle_run(rng: &mut impl Rng, ops: usize) -> usize {
    let capacity = rng.gen_range(1..=64u64);
    let allocator = if rng.gen_bool(0.5) {
        AllocatorModel::ArenaReuse
    } else {
        AllocatorModel::MapHeavy
    };
    let mut sim = SimState::new(SimConfig::with_capacity(capacity * PAGE_SIZE, allocator)).unwrap();
    let mut oracle = LruOracle::new(capacity as usize);
    let mut live: Vec<RegionId> = Vec::new();
    for _ in 0..ops {
        match rng.gen_range(0..10) {
            0..=1 => {
                let size = rng.gen_range(1..=24 * PAGE_SIZE);
                let r = sim.alloc(size).unwrap();
                oracle.on_alloc(sim.region_pages(r).unwrap(), allocator);
                live.push(r);
            }
            2 if !live.is_empty() => {
                let r = live.swap_remove(rng.gen_range(0..live.len()));
                let pages = sim.region_pages(r).unwrap().to_vec();
                sim.free(r).unwrap();
                oracle.on_free(&pages, allocator);
            }
            _ if !live.is_empty() => {
                let r = live[rng.gen_range(0..live.len())];
                let size = sim.region_size(r).unwrap();
                let offset = rng.gen_range(0..size);
                let length = rng.gen_range(1..=size - offset);
                let first = (offset / PAGE_SIZE) as usize;
                let last = ((offset + length - 1) / PAGE_SIZE) as usize;
                let pages = sim.region_pages(r).unwrap()[first..=last].to_vec();
                let kind =
                    [AccessKind::SequentialRead, AccessKind::RandomWrite][rng.gen_range(0..2)];
                sim.touch(r, offset, length, kind).unwrap();
                oracle.on_touch(&pages);
            }
            _ => {}
        }
        let rep = sim.report();
        assert!(rep.resident_pages <= capacity, "residency bound violated");
        assert_eq!(
            sim.resident_pages(),
            oracle.order,
            "residency order diverged"
        );
        assert_eq!(rep.epc_evictions, oracle.evictions);
        assert_eq!(rep.epc_loads, oracle.loads);
    }
    ops
}

/// Alloc/touch/free churn; returns the total number of pages allocated.
pub fn churn(sim: &mut SimState, rng: &mut impl Rng, rounds: usize, touch: bool) -> u64 {
    let mut pages = 0;
    let mut live: Vec<RegionId> = Vec::new();
    for _ in 0..rounds {
        let size = rng.gen_range(1..=16 * PAGE_SIZE);
        pages += size.div_ceil(PAGE_SIZE);
        let r = sim.alloc(size).unwrap();
        if touch {
            sim.touch(r, 0, size, AccessKind::SequentialWrite).unwrap();
        }
        live.push(r);
        if live.len() > 3 || rng.gen_bool(0.5) {
            let victim = live.remove(0);
            sim.free(victim).unwrap();
        }
    }
    for r in live {
        sim.free(r).unwrap();
    }
    pages
}

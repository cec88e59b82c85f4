//! Deterministic cost model of enclave memory: a bounded page cache with LRU
//! residency, paging and zeroing charges, two allocator behaviours and
//! boundary-call accounting. Costs are abstract units, never wall time.

mod log;
mod lru;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use log::{parse_log, replay, write_log, Event, EventKind};
use lru::Lru;

pub const PAGE_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AllocatorModel {
    /// Freed pages stay in a per-process pool and are reused without zeroing.
    ArenaReuse,
    /// Every allocation maps and zeroes fresh pages; frees unmap them.
    MapHeavy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    SequentialRead,
    SequentialWrite,
    RandomRead,
    RandomWrite,
}

impl AccessKind {
    pub fn is_random(self) -> bool {
        matches!(self, AccessKind::RandomRead | AccessKind::RandomWrite)
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            AccessKind::SequentialRead => "seq_read",
            AccessKind::SequentialWrite => "seq_write",
            AccessKind::RandomRead => "rand_read",
            AccessKind::RandomWrite => "rand_write",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    ECall,
    OCall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epc_capacity_bytes: u64,
    pub page_size: u64,
    pub epc_load_cost: f64,
    pub epc_evict_cost: f64,
    pub zero_page_cost: f64,
    pub ecall_cost: f64,
    pub ocall_cost: f64,
    pub byte_copy_cost: f64,
    pub cache_miss_factor: f64,
    pub numa_factor: f64,
    pub allocator: AllocatorModel,
    /// Upper bound on mapped memory; allocations beyond it fail.
    pub address_space_bytes: u64,
    /// ArenaReuse only: memory reserved up front for per-thread arenas.
    pub arena_reserve_bytes: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epc_capacity_bytes: 128 << 20,
            page_size: PAGE_SIZE,
            epc_load_cost: 40_000.0,
            epc_evict_cost: 40_000.0,
            zero_page_cost: 8_000.0,
            ecall_cost: 50_000.0,
            ocall_cost: 50_000.0,
            byte_copy_cost: 1.0,
            cache_miss_factor: 5.0,
            numa_factor: 1.0,
            allocator: AllocatorModel::ArenaReuse,
            address_space_bytes: 64 << 30,
            arena_reserve_bytes: 0,
        }
    }
}

impl SimConfig {
    pub fn with_capacity(epc_capacity_bytes: u64, allocator: AllocatorModel) -> Self {
        Self {
            epc_capacity_bytes,
            allocator,
            ..Self::default()
        }
    }

    pub fn capacity_pages(&self) -> u64 {
        self.epc_capacity_bytes / self.page_size
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_owned()));
        if self.page_size != PAGE_SIZE {
            return bad("page_size must be 4096");
        }
        if self.epc_capacity_bytes == 0 || !self.epc_capacity_bytes.is_multiple_of(self.page_size) {
            return bad("capacity must be a positive multiple of the page size");
        }
        let costs = [
            self.epc_load_cost,
            self.epc_evict_cost,
            self.zero_page_cost,
            self.ecall_cost,
            self.ocall_cost,
            self.byte_copy_cost,
        ];
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return bad("cost weights must be finite and non-negative");
        }
        if !(self.cache_miss_factor >= 1.0 && self.numa_factor >= 1.0)
            || !self.cache_miss_factor.is_finite()
            || !self.numa_factor.is_finite()
        {
            return bad("cache_miss_factor and numa_factor must be finite and at least 1");
        }
        if self.arena_reserve_bytes > self.address_space_bytes {
            return bad("arena reservation exceeds the address space");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulated out of memory: {requested} bytes requested, {mapped} of {bound} mapped")]
    OutOfMemory {
        requested: u64,
        mapped: u64,
        bound: u64,
    },
    #[error("simulator usage error: {0}")]
    Usage(String),
    #[error("simulator configuration error: {0}")]
    Config(String),
    #[error("event log error: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionId(pub u64);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub epc_loads: u64,
    pub epc_evictions: u64,
    pub pages_zeroed: u64,
    pub ecalls: u64,
    pub ocalls: u64,
    pub boundary_bytes: u64,
    pub accumulated_cost: f64,
    pub paging_cost: f64,
    pub zeroing_cost: f64,
    pub access_cost: f64,
    pub boundary_cost: f64,
    pub resident_pages: u64,
    pub mapped_pages: u64,
    pub peak_mapped_pages: u64,
    pub allocated_regions: u64,
}

#[derive(Debug, Clone)]
struct Region {
    pages: Vec<u32>,
    size: u64,
}

/// The simulator's accounting state.
#[derive(Debug, Clone)]
pub struct SimState {
    config: SimConfig,
    lru: Lru,
    regions: HashMap<RegionId, Region>,
    next_region: u64,
    /// ArenaReuse pool of freed pages, reused last-in first-out.
    pool: Vec<u32>,
    /// Page ids released by MapHeavy frees, handed out again before new ids.
    unmapped_ids: Vec<u32>,
    next_page: u32,
    mapped_pages: u64,
    report: SimReport,
    log: Option<Vec<Event>>,
}

impl SimState {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let mut s = Self {
            config,
            lru: Lru::new(),
            regions: HashMap::new(),
            next_region: 0,
            pool: Vec::new(),
            unmapped_ids: Vec::new(),
            next_page: 0,
            mapped_pages: 0,
            report: SimReport::default(),
            log: None,
        };
        if s.config.allocator == AllocatorModel::ArenaReuse && s.config.arena_reserve_bytes > 0 {
            let pages = s.config.arena_reserve_bytes.div_ceil(PAGE_SIZE);
            for _ in 0..pages {
                let p = s.fresh_page();
                s.pool.push(p);
            }
            s.mapped_pages = pages;
            s.report.peak_mapped_pages = pages;
            s.pool.reverse();
        }
        Ok(s)
    }

    /// Records every subsequent operation for [`write_log`].
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn take_log(&mut self) -> Vec<Event> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn report(&self) -> SimReport {
        let mut r = self.report;
        r.resident_pages = self.lru.len() as u64;
        r.mapped_pages = self.mapped_pages;
        r.allocated_regions = self.regions.len() as u64;
        r
    }

    /// Resident page ids, least recently used first.
    pub fn resident_pages(&self) -> Vec<u32> {
        self.lru.iter().collect()
    }

    pub fn region_pages(&self, region: RegionId) -> Option<&[u32]> {
        self.regions.get(&region).map(|r| r.pages.as_slice())
    }

    pub fn region_size(&self, region: RegionId) -> Option<u64> {
        self.regions.get(&region).map(|r| r.size)
    }

    fn fresh_page(&mut self) -> u32 {
        let p = self.next_page;
        self.next_page += 1;
        p
    }

    fn record(
        &mut self,
        kind: EventKind,
        region: Option<RegionId>,
        offset: u64,
        length: u64,
        cost: f64,
    ) {
        if let Some(log) = &mut self.log {
            log.push(Event {
                kind,
                region,
                offset,
                length,
                cost,
            });
        }
    }

    /// Makes `page` most recently used, evicting as needed. Returns
    /// (loaded, evictions).
    fn make_resident(&mut self, page: u32) -> (u64, u64) {
        let loaded = self.lru.touch(page);
        let mut evicted = 0;
        while self.lru.len() as u64 > self.config.capacity_pages() {
            self.lru.pop_lru();
            evicted += 1;
        }
        (loaded as u64, evicted)
    }

    pub fn alloc(&mut self, size_bytes: u64) -> Result<RegionId, SimError> {
        self.alloc_charged(size_bytes).map(|(id, _)| id)
    }

    /// Like [`SimState::alloc`], also returning the cost charged.
    pub fn alloc_charged(&mut self, size_bytes: u64) -> Result<(RegionId, f64), SimError> {
        if size_bytes == 0 {
            return Err(SimError::Usage("allocation of zero bytes".into()));
        }
        let n = size_bytes.div_ceil(PAGE_SIZE);
        let c = self.config.clone();
        let reused = match c.allocator {
            AllocatorModel::ArenaReuse => n.min(self.pool.len() as u64),
            AllocatorModel::MapHeavy => 0,
        };
        let new_mapped = self.mapped_pages + (n - reused);
        if new_mapped * PAGE_SIZE > c.address_space_bytes {
            return Err(SimError::OutOfMemory {
                requested: size_bytes,
                mapped: self.mapped_pages * PAGE_SIZE,
                bound: c.address_space_bytes,
            });
        }
        let mut pages = Vec::with_capacity(n as usize);
        for _ in 0..reused {
            pages.push(self.pool.pop().unwrap());
        }
        let mut evictions = 0;
        for _ in reused..n {
            let p = match c.allocator {
                AllocatorModel::MapHeavy => {
                    self.unmapped_ids.pop().unwrap_or_else(|| self.fresh_page())
                }
                AllocatorModel::ArenaReuse => self.fresh_page(),
            };
            evictions += self.make_resident(p).1;
            pages.push(p);
        }
        let zeroed = match c.allocator {
            AllocatorModel::MapHeavy => n,
            AllocatorModel::ArenaReuse => 0,
        };
        self.mapped_pages = new_mapped;
        self.report.peak_mapped_pages = self.report.peak_mapped_pages.max(new_mapped);
        let zero_cost = zeroed as f64 * c.zero_page_cost * c.numa_factor;
        let paging_cost = evictions as f64 * c.epc_evict_cost * c.numa_factor;
        self.report.pages_zeroed += zeroed;
        self.report.epc_evictions += evictions;
        self.report.zeroing_cost += zero_cost;
        self.report.paging_cost += paging_cost;
        let cost = zero_cost + paging_cost;
        self.report.accumulated_cost += cost;

        let id = RegionId(self.next_region);
        self.next_region += 1;
        self.regions.insert(
            id,
            Region {
                pages,
                size: size_bytes,
            },
        );
        self.record(EventKind::Alloc, Some(id), 0, size_bytes, cost);
        Ok((id, cost))
    }

    pub fn free(&mut self, region: RegionId) -> Result<f64, SimError> {
        let r = self.regions.remove(&region).ok_or_else(|| {
            SimError::Usage(format!("free of unknown or already freed region {region}"))
        })?;
        let c = &self.config;
        let cost = match c.allocator {
            AllocatorModel::ArenaReuse => {
                self.pool.extend(r.pages.iter().rev());
                0.0
            }
            AllocatorModel::MapHeavy => {
                let mut evicted = 0u64;
                for &p in &r.pages {
                    evicted += self.lru.remove(p) as u64;
                    self.unmapped_ids.push(p);
                }
                self.mapped_pages -= r.pages.len() as u64;
                let cost = evicted as f64 * c.epc_evict_cost * c.numa_factor;
                self.report.epc_evictions += evicted;
                self.report.paging_cost += cost;
                cost
            }
        };
        self.report.accumulated_cost += cost;
        self.record(EventKind::Free, Some(region), 0, 0, cost);
        Ok(cost)
    }

    pub fn touch(
        &mut self,
        region: RegionId,
        offset: u64,
        length: u64,
        kind: AccessKind,
    ) -> Result<f64, SimError> {
        let r = self
            .regions
            .get(&region)
            .ok_or_else(|| SimError::Usage(format!("touch of unknown region {region}")))?;
        let end = offset
            .checked_add(length)
            .filter(|&e| e <= r.size)
            .ok_or_else(|| {
                SimError::Usage(format!(
                    "touch [{offset}, +{length}) outside region {region} of {} bytes",
                    r.size
                ))
            })?;
        let (mut loads, mut evictions) = (0, 0);
        if length > 0 {
            let first = (offset / PAGE_SIZE) as usize;
            let last = ((end - 1) / PAGE_SIZE) as usize;
            let pages: Vec<u32> = r.pages[first..=last].to_vec();
            for p in pages {
                let (l, e) = self.make_resident(p);
                loads += l;
                evictions += e;
            }
        }
        let c = &self.config;
        let mult = if kind.is_random() {
            c.cache_miss_factor
        } else {
            1.0
        } * c.numa_factor;
        let paging = (loads as f64 * c.epc_load_cost + evictions as f64 * c.epc_evict_cost) * mult;
        let access = length as f64 * c.byte_copy_cost * mult;
        self.report.epc_loads += loads;
        self.report.epc_evictions += evictions;
        self.report.paging_cost += paging;
        self.report.access_cost += access;
        let cost = paging + access;
        self.report.accumulated_cost += cost;
        self.record(EventKind::Touch(kind), Some(region), offset, length, cost);
        Ok(cost)
    }

    pub fn charge_boundary(&mut self, kind: BoundaryKind, bytes: u64) -> f64 {
        let c = &self.config;
        let call = match kind {
            BoundaryKind::ECall => c.ecall_cost,
            BoundaryKind::OCall => c.ocall_cost,
        };
        let cost = call + bytes as f64 * c.byte_copy_cost;
        match kind {
            BoundaryKind::ECall => self.report.ecalls += 1,
            BoundaryKind::OCall => self.report.ocalls += 1,
        }
        self.report.boundary_bytes += bytes;
        self.report.boundary_cost += cost;
        self.report.accumulated_cost += cost;
        self.record(EventKind::Boundary(kind), None, 0, bytes, cost);
        cost
    }
}

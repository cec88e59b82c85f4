//! Memory events recorded by workers and replayed into a [`SimState`].
//!
//! Each worker owns a tracker with its own handle namespace. At a barrier the
//! executor replays the trackers in worker order, so the simulated event
//! sequence depends only on the static morsel schedule.

use std::collections::HashMap;

use crate::sim::{AccessKind, BoundaryKind, RegionId, SimError, SimState, PAGE_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Handle(u64);

#[derive(Debug, Clone, Copy, PartialEq)]
enum MemOp {
    Alloc(Handle, u64),
    Free(Handle),
    Touch(Handle, u64, u64, AccessKind),
    Boundary(BoundaryKind, u64),
}

#[derive(Debug)]
pub struct MemTracker {
    namespace: u64,
    next: u64,
    enabled: bool,
    cache_resident_bytes: u64,
    ops: Vec<MemOp>,
}

impl MemTracker {
    pub fn new(namespace: u64, enabled: bool, cache_resident_bytes: u64) -> Self {
        Self {
            namespace,
            next: 0,
            enabled,
            cache_resident_bytes,
            ops: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn alloc(&mut self, bytes: u64) -> Handle {
        let h = Handle(self.namespace << 40 | self.next);
        self.next += 1;
        if self.enabled {
            self.ops.push(MemOp::Alloc(h, bytes.max(1)));
        }
        h
    }

    /// Allocates and writes a fresh buffer.
    pub fn write_new(&mut self, bytes: u64) -> Handle {
        let h = self.alloc(bytes);
        self.touch(h, 0, bytes, AccessKind::SequentialWrite);
        h
    }

    pub fn free(&mut self, h: Handle) {
        if self.enabled {
            self.ops.push(MemOp::Free(h));
        }
    }

    pub fn touch(&mut self, h: Handle, offset: u64, len: u64, kind: AccessKind) {
        if self.enabled && len > 0 {
            self.ops.push(MemOp::Touch(h, offset, len, kind));
        }
    }

    pub fn read(&mut self, h: Handle, len: u64) {
        self.touch(h, 0, len, AccessKind::SequentialRead);
    }

    pub fn ocall(&mut self, bytes: u64) {
        if self.enabled {
            self.ops.push(MemOp::Boundary(BoundaryKind::OCall, bytes));
        }
    }

    pub fn ecall(&mut self, bytes: u64) {
        if self.enabled {
            self.ops.push(MemOp::Boundary(BoundaryKind::ECall, bytes));
        }
    }

    /// Access pattern for a hash structure of `bytes`: structures larger
    /// than the cache-resident threshold are probed randomly.
    pub fn probe_kind(&self, bytes: u64, write: bool) -> AccessKind {
        match (bytes > self.cache_resident_bytes, write) {
            (true, false) => AccessKind::RandomRead,
            (true, true) => AccessKind::RandomWrite,
            (false, false) => AccessKind::SequentialRead,
            (false, true) => AccessKind::SequentialWrite,
        }
    }

    /// Records point accesses of `width` bytes at `offsets` into a region of
    /// `size` bytes, coalesced to one touch per distinct page.
    pub fn probe(
        &mut self,
        h: Handle,
        size: u64,
        offsets: &mut Vec<u64>,
        width: u64,
        kind: AccessKind,
    ) {
        if !self.enabled || offsets.is_empty() {
            offsets.clear();
            return;
        }
        offsets.sort_unstable();
        let mut i = 0;
        while i < offsets.len() {
            let page = offsets[i] / PAGE_SIZE;
            let mut n = 0;
            while i < offsets.len() && offsets[i] / PAGE_SIZE == page {
                n += 1;
                i += 1;
            }
            let start = page * PAGE_SIZE;
            let len = (n * width).min(PAGE_SIZE).min(size.saturating_sub(start));
            self.touch(h, start, len, kind);
        }
        offsets.clear();
    }

    /// Moves the recorded events into `sink`, emptying this tracker.
    pub fn drain_into(&mut self, sink: &mut SimSink<'_>) -> Result<(), SimError> {
        let ops = std::mem::take(&mut self.ops);
        if let Some(s) = sink.sim.as_deref_mut() {
            for op in ops {
                match op {
                    MemOp::Alloc(h, bytes) => {
                        let r = s.alloc(bytes)?;
                        sink.regions.insert(h, r);
                    }
                    MemOp::Free(h) => {
                        let r = sink.regions.remove(&h).ok_or_else(|| {
                            SimError::Usage("engine freed an untracked buffer".into())
                        })?;
                        s.free(r)?;
                    }
                    MemOp::Touch(h, off, len, kind) => {
                        let r = *sink.regions.get(&h).ok_or_else(|| {
                            SimError::Usage("engine touched an untracked buffer".into())
                        })?;
                        s.touch(r, off, len, kind)?;
                    }
                    MemOp::Boundary(kind, bytes) => {
                        s.charge_boundary(kind, bytes);
                    }
                }
            }
        }
        Ok(())
    }
}

/// The executor's view of the attached simulator.
pub struct SimSink<'a> {
    pub sim: Option<&'a mut SimState>,
    regions: HashMap<Handle, RegionId>,
}

impl<'a> SimSink<'a> {
    pub fn new(sim: Option<&'a mut SimState>) -> Self {
        Self {
            sim,
            regions: HashMap::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.sim.is_some()
    }

    /// Frees every region still live, so a query leaves no allocation behind.
    pub fn release_all(&mut self) -> Result<(), SimError> {
        if let Some(s) = self.sim.as_deref_mut() {
            let mut live: Vec<_> = self.regions.drain().collect();
            live.sort_by_key(|(h, _)| h.0);
            for (_, r) in live {
                s.free(r)?;
            }
        }
        Ok(())
    }
}

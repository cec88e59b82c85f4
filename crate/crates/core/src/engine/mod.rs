//! Vectorized query execution over encrypted column files.

pub mod agg;
mod eval;
pub mod exec;
pub mod hash;
pub mod join;
mod mem;
pub mod oracle;
pub mod parse;
pub mod plan;

use thiserror::Error;

pub use agg::{
    partition_aggregate, partition_of, preaggregate, AggLayout, AggState, PartitionBuffer,
    PreAggStats, RadixPartitionSet,
};
pub use exec::{execute, ExecStats, OperatorStats, TableFile};
pub use join::hash_join;
pub use oracle::{oracle_execute, results_equivalent};
pub use parse::{parse_plan, parse_queries, QueryDef};
pub use plan::{AggFunc, Aggregate, ArithOp, Catalog, CmpOp, Expr, PlanError, PlanNode, SortKey};

use crate::sim::SimError;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid engine config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub threads: usize,
    pub vector_capacity: usize,
    /// Phase-1 aggregation table slots; a power of two.
    pub preagg_slots: usize,
    pub partition_bits: u32,
    /// Hash structures up to this size are treated as cache resident and
    /// their probes as sequential accesses.
    pub cache_resident_bytes: u64,
    pub hash_seed: u64,
    /// Size of one physical read of a column chunk.
    pub read_chunk: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            threads: 1,
            vector_capacity: 2048,
            preagg_slots: 2048,
            partition_bits: 4,
            cache_resident_bytes: 256 << 10,
            hash_seed: 0x5eed_c0de,
            read_chunk: crate::store::DEFAULT_READ_CHUNK,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.into()));
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if self.vector_capacity == 0 {
            return bad("vector_capacity must be at least 1");
        }
        if !self.preagg_slots.is_power_of_two() || self.preagg_slots < 4 {
            return bad("preagg_slots must be a power of two of at least 4");
        }
        if self.partition_bits > 16 {
            return bad("partition_bits must be at most 16");
        }
        if self.read_chunk == 0 {
            return bad("read_chunk must be positive");
        }
        Ok(())
    }
}

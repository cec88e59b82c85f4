//! Benchmark harness: data generation, the query suite, configuration
//! sweeps and reports.

pub mod datagen;
pub mod report;
pub mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{parse_queries, Catalog, EngineError, PlanError, PlanNode};
use crate::sim::AllocatorModel;
use crate::store::{CodecKind, StoreError};

pub use datagen::generate_data;
pub use report::{power_score, CalibrationCheck, ConfigScore, Record, SweepReport};
pub use run::{
    colour_matrix, run_query, sweep, CostBreakdown, CostCalibration, Dataset, HarnessOptions,
    QueryRecord, SimCounters,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("power score needs positive, finite times")]
    NonPositiveTime,
    #[error("no configuration in the matrix is feasible on this host")]
    AllInfeasible,
    #[error("baseline {0} is missing or infeasible")]
    Baseline(String),
    #[error("query {0} returned different rows across repetitions")]
    Nondeterministic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Encryption {
    None,
    SoftwareAes,
    HardwareAes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnclaveMode {
    Off,
    SimFit,
    SimOverrun,
    SimRemoteNuma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    AggregationHeavy,
    JoinHeavy,
    ScanHeavy,
}

impl FromStr for Category {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aggregation-heavy" => Ok(Category::AggregationHeavy),
            "join-heavy" => Ok(Category::JoinHeavy),
            "scan-heavy" => Ok(Category::ScanHeavy),
            other => Err(HarnessError::Config(format!(
                "unknown query category {other}"
            ))),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::AggregationHeavy => "aggregation-heavy",
            Category::JoinHeavy => "join-heavy",
            Category::ScanHeavy => "scan-heavy",
        })
    }
}

/// One bar of the configuration matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub name: String,
    pub scale: u32,
    pub codec: CodecKind,
    pub encryption: Encryption,
    pub enclave: EnclaveMode,
    pub allocator: AllocatorModel,
    pub threads: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.scale == 0 {
            return Err(HarnessError::Config(format!(
                "{}: scale must be at least 1",
                self.name
            )));
        }
        if self.threads == 0 {
            return Err(HarnessError::Config(format!(
                "{}: threads must be at least 1",
                self.name
            )));
        }
        Ok(())
    }

    /// Why this configuration cannot run here, if it cannot.
    pub fn infeasible_reason(&self) -> Option<String> {
        (self.encryption == Encryption::HardwareAes && !crate::crypto::hardware_aes_available())
            .then(|| "hardware AES is not available on this host".to_owned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub name: String,
    pub category: Category,
    pub plan: PlanNode,
}

pub const DEFAULT_SUITE: &str = include_str!("../../queries/suite.sexp");

/// Schemas of the generated tables.
pub fn catalog() -> Catalog {
    Catalog::from([
        ("customer".to_owned(), datagen::customer_schema()),
        ("lineitem".to_owned(), datagen::lineitem_schema()),
        ("orders".to_owned(), datagen::orders_schema()),
        ("part".to_owned(), datagen::part_schema()),
    ])
}

/// Parses a query file and validates every plan against the generated schema.
pub fn parse_query_file(src: &str) -> Result<Vec<QuerySpec>, HarnessError> {
    let cat = catalog();
    parse_queries(src)?
        .into_iter()
        .map(|q| {
            q.plan.output_schema(&cat)?;
            Ok(QuerySpec {
                category: q.category.parse()?,
                name: q.name,
                plan: q.plan,
            })
        })
        .collect()
}

pub fn default_queries() -> Vec<QuerySpec> {
    parse_query_file(DEFAULT_SUITE).expect("bundled suite is valid")
}

//! Three interactive views over the simulator and the cost model, exported
//! to JavaScript. Every export takes and returns JSON strings.
//!
//! The query engine times itself with `std::time::Instant`, which is not
//! available on `wasm32-unknown-unknown`, so the bar chart re-costs a
//! recorded sweep instead of running queries in the page.

use std::collections::BTreeMap;

use confbench::harness::{colour_matrix, EnclaveMode, QueryRecord, Record, SweepReport};
use confbench::sim::{AccessKind, AllocatorModel, SimConfig, SimReport, SimState, PAGE_SIZE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const SNAPSHOT: &str = include_str!("../data/fig1-scale10.json");
const MIB: u64 = 1 << 20;

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Sequential,
    Random,
}

#[derive(Debug, Clone, Serialize)]
pub struct PagingPoint {
    pub working_set_mib: f64,
    pub epc_loads: u64,
    pub epc_evictions: u64,
    pub paging_cost: f64,
    pub access_cost: f64,
    /// Modeled memory cost per byte touched.
    pub cost_per_byte: f64,
}

/// Allocates a working set, then touches all of it `passes` times.
pub fn paging_point(working_set: u64, capacity: u64, passes: u32, pattern: Pattern) -> PagingPoint {
    let pages = working_set.div_ceil(PAGE_SIZE).max(1);
    let config = SimConfig::with_capacity(
        capacity.max(PAGE_SIZE) / PAGE_SIZE * PAGE_SIZE,
        AllocatorModel::ArenaReuse,
    );
    let mut sim = SimState::new(config).expect("valid config");
    let region = sim
        .alloc(pages * PAGE_SIZE)
        .expect("fits the address space");
    let mut rng = ChaCha8Rng::seed_from_u64(pages);
    for _ in 0..passes {
        for i in 0..pages {
            let (page, kind) = match pattern {
                Pattern::Sequential => (i, AccessKind::SequentialRead),
                Pattern::Random => (rng.gen_range(0..pages), AccessKind::RandomRead),
            };
            sim.touch(region, page * PAGE_SIZE, PAGE_SIZE, kind)
                .expect("in bounds");
        }
    }
    let r = sim.report();
    let touched = (pages * PAGE_SIZE * passes as u64) as f64;
    PagingPoint {
        working_set_mib: (pages * PAGE_SIZE) as f64 / MIB as f64,
        epc_loads: r.epc_loads,
        epc_evictions: r.epc_evictions,
        paging_cost: r.paging_cost,
        access_cost: r.access_cost,
        cost_per_byte: (r.paging_cost + r.access_cost) / touched.max(1.0),
    }
}

/// Paging behaviour as the working set grows from 1/8 to `max_ratio` times
/// the EPC capacity.
#[wasm_bindgen]
pub fn epc_curve(
    capacity_mib: f64,
    max_ratio: f64,
    steps: u32,
    passes: u32,
    pattern: &str,
) -> Result<String, JsError> {
    let pattern: Pattern =
        serde_json::from_value(serde_json::Value::String(pattern.into())).map_err(js)?;
    if !(capacity_mib > 0.0 && max_ratio > 0.0) || steps == 0 || passes == 0 {
        return Err(JsError::new(
            "capacity, ratio, steps and passes must be positive",
        ));
    }
    let capacity = (capacity_mib * MIB as f64) as u64;
    let points: Vec<PagingPoint> = (1..=steps)
        .map(|i| {
            let ratio = 0.125 + (max_ratio - 0.125) * i as f64 / steps as f64;
            paging_point((capacity as f64 * ratio) as u64, capacity, passes, pattern)
        })
        .collect();
    serde_json::to_string(&points).map_err(js)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChurnResult {
    pub allocator: AllocatorModel,
    pub pages_allocated: u64,
    pub report: SimReport,
}

/// Alloc, touch and free a stream of buffers, keeping at most `live` of them
/// alive, under both allocator models with the same request sequence.
pub fn churn(rounds: u32, max_kib: u64, live: usize, capacity: u64, seed: u64) -> Vec<ChurnResult> {
    [AllocatorModel::ArenaReuse, AllocatorModel::MapHeavy]
        .into_iter()
        .map(|allocator| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sim =
                SimState::new(SimConfig::with_capacity(capacity, allocator)).expect("valid config");
            let mut held = std::collections::VecDeque::new();
            let mut pages_allocated = 0;
            for _ in 0..rounds {
                let size = rng.gen_range(1..=max_kib.max(1) * 1024);
                pages_allocated += size.div_ceil(PAGE_SIZE);
                let r = sim.alloc(size).expect("fits the address space");
                sim.touch(r, 0, size, AccessKind::SequentialWrite)
                    .expect("in bounds");
                held.push_back(r);
                if held.len() > live {
                    sim.free(held.pop_front().unwrap()).expect("live region");
                }
            }
            ChurnResult {
                allocator,
                pages_allocated,
                report: sim.report(),
            }
        })
        .collect()
}

#[wasm_bindgen]
pub fn allocator_churn(
    rounds: u32,
    max_kib: u32,
    live: u32,
    capacity_mib: f64,
    seed: u32,
) -> Result<String, JsError> {
    if rounds == 0 || max_kib == 0 || capacity_mib <= 0.0 {
        return Err(JsError::new(
            "rounds, buffer size and capacity must be positive",
        ));
    }
    let capacity = ((capacity_mib * MIB as f64) as u64 / PAGE_SIZE).max(1) * PAGE_SIZE;
    serde_json::to_string(&churn(
        rounds,
        max_kib as u64,
        live as usize,
        capacity,
        seed as u64,
    ))
    .map_err(js)
}

/// Weights applied when re-costing the recorded sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Knobs {
    pub row_cost: f64,
    pub software_aes_per_byte: f64,
    pub hardware_aes_per_byte: f64,
    pub decompress_per_byte: f64,
    /// Multiplies the enclave's memory cost above the same configuration
    /// run natively.
    pub enclave_memory_scale: f64,
}

impl Default for Knobs {
    fn default() -> Self {
        let c = confbench::harness::CostCalibration::default();
        Self {
            row_cost: c.row_cost,
            software_aes_per_byte: c.software_aes_per_byte,
            hardware_aes_per_byte: c.hardware_aes_per_byte,
            decompress_per_byte: c.decompress_per_byte,
            enclave_memory_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Bar {
    pub config: String,
    pub ratio: f64,
    pub per_query: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Bars {
    pub baseline: String,
    pub bars: Vec<Bar>,
    pub checks: Vec<confbench::harness::CalibrationCheck>,
}

pub fn snapshot() -> SweepReport {
    SweepReport::from_json(SNAPSHOT).expect("bundled snapshot parses")
}

/// Re-costs every record of `report` under `knobs` and derives the bars.
pub fn recost(
    report: &SweepReport,
    knobs: &Knobs,
) -> Result<Bars, confbench::harness::HarnessError> {
    let matrix: BTreeMap<String, _> = colour_matrix(1, 0, 1)
        .into_iter()
        .map(|c| (c.name.clone(), c))
        .collect();
    let ok: BTreeMap<(&str, &str), &QueryRecord> = report
        .records
        .iter()
        .filter_map(|r| r.result())
        .map(|q| ((q.config.as_str(), q.query.as_str()), q))
        .collect();
    // Memory cost of the native run with the same codec and encryption.
    let native = |name: &str, query: &str| -> Option<f64> {
        let c = matrix.get(name)?;
        let twin = matrix.values().find(|o| {
            o.enclave == EnclaveMode::Off && o.codec == c.codec && o.encryption == c.encryption
        })?;
        ok.get(&(twin.name.as_str(), query)).map(|q| q.cost.memory)
    };

    let records = report
        .records
        .iter()
        .map(|r| {
            let Some(q) = r.result() else {
                return r.clone();
            };
            let mut q = q.clone();
            let per_byte = match matrix.get(&q.config).map(|c| c.encryption) {
                Some(confbench::harness::Encryption::SoftwareAes) => knobs.software_aes_per_byte,
                Some(confbench::harness::Encryption::HardwareAes) => knobs.hardware_aes_per_byte,
                _ => 0.0,
            };
            let memory = match (q.sim.is_some(), native(&q.config, &q.query)) {
                (true, Some(base)) => base + knobs.enclave_memory_scale * (q.cost.memory - base),
                _ => q.cost.memory,
            };
            q.cost.rows = q.rows_processed as f64 * knobs.row_cost;
            q.cost.crypto = q.bytes_decrypted as f64 * per_byte;
            q.cost.decompress = q.bytes_decompressed as f64 * knobs.decompress_per_byte;
            q.cost.memory = memory;
            q.cost.total = q.cost.rows + q.cost.crypto + q.cost.decompress + q.cost.memory;
            q.modeled_cost = q.cost.total;
            Record::Ok(q)
        })
        .collect();

    let derived = SweepReport::derive(&report.baseline, &report.configs, records)?;
    let bars = derived
        .configs
        .iter()
        .map(|c| Bar {
            config: c.clone(),
            ratio: derived
                .score(c)
                .and_then(|s| s.ratio_cost)
                .unwrap_or(f64::NAN),
            per_query: derived
                .relative
                .iter()
                .filter(|r| &r.config == c)
                .map(|r| (r.query.clone(), r.cost))
                .collect(),
        })
        .collect();
    Ok(Bars {
        baseline: derived.baseline.clone(),
        bars,
        checks: derived.calibration_checks(),
    })
}

#[wasm_bindgen]
pub fn default_knobs() -> String {
    serde_json::to_string(&Knobs::default()).expect("plain struct")
}

#[wasm_bindgen]
pub fn figure_bars(knobs_json: &str) -> Result<String, JsError> {
    let knobs: Knobs = serde_json::from_str(knobs_json).map_err(js)?;
    let all = [
        knobs.row_cost,
        knobs.software_aes_per_byte,
        knobs.hardware_aes_per_byte,
        knobs.decompress_per_byte,
        knobs.enclave_memory_scale,
    ];
    if all.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(JsError::new("weights must be finite and non-negative"));
    }
    thread_local! {
        static REPORT: SweepReport = snapshot();
    }
    let bars = REPORT.with(|r| recost(r, &knobs)).map_err(js)?;
    serde_json::to_string(&bars).map_err(js)
}

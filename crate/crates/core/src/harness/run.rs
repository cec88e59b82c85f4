use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{Record, SweepReport};
use super::{EnclaveMode, Encryption, HarnessError, QuerySpec, SweepConfig};
use crate::crypto::{AesKey, BackendKind};
use crate::engine::{execute, EngineConfig, ExecStats, TableFile};
use crate::sim::{AllocatorModel, SimConfig, SimReport, SimState};
use crate::store::{write_table, CodecKind, EncryptionMode, WriteOptions};
use crate::vector::Table;

/// Weights that turn engine counters into modeled cost units. These are
/// fitted so the colour matrix lands near the target ratios; they are
/// not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCalibration {
    pub row_cost: f64,
    pub software_aes_per_byte: f64,
    pub hardware_aes_per_byte: f64,
    pub decompress_per_byte: f64,
    /// Weights for the simulated enclave; capacity is set per run.
    pub enclave: SimConfig,
    pub remote_numa_factor: f64,
    /// SimOverrun capacity as a fraction of the SimFit peak.
    pub overrun_fraction: f64,
}

impl Default for CostCalibration {
    fn default() -> Self {
        Self {
            row_cost: 20.0,
            software_aes_per_byte: 16.0,
            hardware_aes_per_byte: 1.0,
            decompress_per_byte: 1.0,
            enclave: SimConfig::default(),
            remote_numa_factor: 1.3,
            overrun_fraction: 0.5,
        }
    }
}

impl CostCalibration {
    /// Memory costs outside an enclave: copies only, no paging, no boundary
    /// calls and no cache-miss amplification.
    pub fn native_sim(&self) -> SimConfig {
        SimConfig {
            epc_capacity_bytes: self.enclave.address_space_bytes,
            epc_load_cost: 0.0,
            epc_evict_cost: 0.0,
            zero_page_cost: 0.0,
            ecall_cost: 0.0,
            ocall_cost: 0.0,
            cache_miss_factor: 1.0,
            numa_factor: 1.0,
            allocator: AllocatorModel::ArenaReuse,
            arena_reserve_bytes: 0,
            ..self.enclave.clone()
        }
    }

    pub fn modeled(&self, stats: &ExecStats, encryption: Encryption) -> CostBreakdown {
        let per_byte = match encryption {
            Encryption::None => 0.0,
            Encryption::SoftwareAes => self.software_aes_per_byte,
            Encryption::HardwareAes => self.hardware_aes_per_byte,
        };
        let rows = stats.rows_processed() as f64 * self.row_cost;
        let crypto = stats.scan.bytes_decrypted as f64 * per_byte;
        let decompress = stats.scan.bytes_decompressed as f64 * self.decompress_per_byte;
        let memory = stats.memory_cost.unwrap_or(0.0);
        CostBreakdown {
            rows,
            crypto,
            decompress,
            memory,
            total: rows + crypto + decompress + memory,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub rows: f64,
    pub crypto: f64,
    pub decompress: f64,
    pub memory: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimCounters {
    pub epc_capacity_pages: u64,
    pub epc_loads: u64,
    pub epc_evictions: u64,
    pub pages_zeroed: u64,
    pub ecalls: u64,
    pub ocalls: u64,
    pub boundary_bytes: u64,
    pub peak_mapped_pages: u64,
}

impl SimCounters {
    fn new(r: &SimReport, capacity_pages: u64) -> Self {
        Self {
            epc_capacity_pages: capacity_pages,
            epc_loads: r.epc_loads,
            epc_evictions: r.epc_evictions,
            pages_zeroed: r.pages_zeroed,
            ecalls: r.ecalls,
            ocalls: r.ocalls,
            boundary_bytes: r.boundary_bytes,
            peak_mapped_pages: r.peak_mapped_pages,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub config: String,
    pub query: String,
    /// Wall time of each repetition in seconds, after one warm-up run.
    pub samples_s: Vec<f64>,
    pub mean_s: f64,
    pub modeled_cost: f64,
    pub cost: CostBreakdown,
    pub rows_processed: u64,
    pub result_rows: u64,
    pub bytes_read: u64,
    pub bytes_decrypted: u64,
    pub bytes_decompressed: u64,
    pub physical_reads: u64,
    /// Present only when the enclave is simulated.
    pub sim: Option<SimCounters>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessOptions {
    #[serde(skip, default)]
    pub engine: EngineConfig,
    pub calibration: CostCalibration,
    pub row_group_rows: usize,
    pub page_target_bytes: usize,
    pub encryption_mode: EncryptionMode,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            calibration: CostCalibration::default(),
            row_group_rows: 16_384,
            page_target_bytes: 64 << 10,
            encryption_mode: EncryptionMode::GcmAll,
        }
    }
}

type Files = Arc<BTreeMap<String, Vec<u8>>>;

/// Generated tables plus their encoded files, written on first use.
pub struct Dataset {
    pub scale: u32,
    pub seed: u64,
    pub tables: BTreeMap<String, Table>,
    key: AesKey,
    files: HashMap<(CodecKind, bool), Files>,
    peaks: HashMap<(String, CodecKind, bool, AllocatorModel, usize), u64>,
}

impl Dataset {
    pub fn generate(scale: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_795f_7365_6564);
        let key: [u8; 16] = rng.gen();
        Self {
            scale,
            seed,
            tables: super::generate_data(scale, seed),
            key: AesKey::new(&key).expect("16-byte key"),
            files: HashMap::new(),
            peaks: HashMap::new(),
        }
    }

    pub fn key(&self) -> &AesKey {
        &self.key
    }

    /// Total unencrypted file size with Lightweight over Uncompressed.
    pub fn codec_ratio(&mut self, opts: &HarnessOptions) -> Result<f64, HarnessError> {
        let size = |f: &Files| f.values().map(Vec::len).sum::<usize>() as f64;
        let l = size(&self.files(CodecKind::Lightweight, false, opts)?);
        let u = size(&self.files(CodecKind::Uncompressed, false, opts)?);
        Ok(l / u)
    }

    /// Encoded files for one codec, encrypted with the dataset key or not.
    pub fn files(
        &mut self,
        codec: CodecKind,
        encrypted: bool,
        opts: &HarnessOptions,
    ) -> Result<Files, HarnessError> {
        if let Some(f) = self.files.get(&(codec, encrypted)) {
            return Ok(f.clone());
        }
        let mut w = WriteOptions {
            codec,
            row_group_rows: opts.row_group_rows,
            page_target_bytes: opts.page_target_bytes,
            ..WriteOptions::default()
        };
        if encrypted {
            w.encryption_mode = opts.encryption_mode;
            w.key = Some(self.key.clone());
        }
        let mut out = BTreeMap::new();
        for (name, t) in &self.tables {
            out.insert(name.clone(), write_table(&t.schema, &t.columns, &w)?);
        }
        let f = Arc::new(out);
        self.files.insert((codec, encrypted), f.clone());
        Ok(f)
    }
}

fn backend(e: Encryption) -> BackendKind {
    match e {
        Encryption::HardwareAes => BackendKind::HardwareAccelerated,
        _ => BackendKind::SoftwarePortable,
    }
}

fn pages(bytes: u64) -> u64 {
    bytes / crate::sim::PAGE_SIZE
}

/// Runs one query under one configuration: a warm-up, then `reps` timed
/// repetitions. Modeled cost comes from a simulator run (the enclave model,
/// or copy costs only when the enclave is off).
pub fn run_query(
    query: &QuerySpec,
    config: &SweepConfig,
    reps: usize,
    ds: &mut Dataset,
    opts: &HarnessOptions,
) -> Result<Record, HarnessError> {
    if let Some(reason) = config.infeasible_reason() {
        return Ok(Record::Skipped {
            config: config.name.clone(),
            query: query.name.clone(),
            reason,
        });
    }
    config.validate()?;
    if reps == 0 {
        return Err(HarnessError::Config(
            "repetitions must be at least 1".into(),
        ));
    }
    if (ds.scale, ds.seed) != (config.scale, config.seed) {
        return Err(HarnessError::Config(format!(
            "{}: dataset is scale {} seed {}",
            config.name, ds.scale, ds.seed
        )));
    }
    let encrypted = config.encryption != Encryption::None;
    let files = ds.files(config.codec, encrypted, opts)?;
    let tables: BTreeMap<String, TableFile<'_>> = files
        .iter()
        .map(|(n, b)| {
            let t = TableFile {
                bytes: b,
                key: encrypted.then(|| ds.key.clone()),
                backend: backend(config.encryption),
            };
            (n.clone(), t)
        })
        .collect();
    let engine = EngineConfig {
        threads: config.threads,
        ..opts.engine.clone()
    };
    let cal = &opts.calibration;

    let sim_config = match config.enclave {
        EnclaveMode::Off => None,
        mode => {
            let key = (
                query.name.clone(),
                config.codec,
                encrypted,
                config.allocator,
                config.threads,
            );
            let peak = match ds.peaks.get(&key) {
                Some(&p) => p,
                None => {
                    let probe = SimConfig {
                        epc_capacity_bytes: cal.enclave.address_space_bytes,
                        allocator: config.allocator,
                        ..cal.enclave.clone()
                    };
                    let mut s = SimState::new(probe).map_err(crate::engine::EngineError::from)?;
                    execute(&query.plan, &tables, &engine, Some(&mut s))?;
                    let p = s.report().peak_mapped_pages.max(1);
                    ds.peaks.insert(key, p);
                    p
                }
            };
            let capacity_pages = match mode {
                EnclaveMode::SimOverrun => ((peak as f64 * cal.overrun_fraction) as u64).max(1),
                _ => peak,
            };
            Some(SimConfig {
                epc_capacity_bytes: capacity_pages * crate::sim::PAGE_SIZE,
                allocator: config.allocator,
                numa_factor: if mode == EnclaveMode::SimRemoteNuma {
                    cal.remote_numa_factor
                } else {
                    cal.enclave.numa_factor
                },
                ..cal.enclave.clone()
            })
        }
    };
    let new_sim =
        |c: &SimConfig| SimState::new(c.clone()).map_err(crate::engine::EngineError::from);

    let run_once = || -> Result<(Table, ExecStats, f64), HarnessError> {
        let mut sim = sim_config.as_ref().map(new_sim).transpose()?;
        let start = Instant::now();
        let (t, stats) = execute(&query.plan, &tables, &engine, sim.as_mut())?;
        Ok((t, stats, start.elapsed().as_secs_f64()))
    };

    run_once()?;
    let mut samples = Vec::with_capacity(reps);
    let mut first: Option<(Table, ExecStats)> = None;
    for _ in 0..reps {
        let (t, stats, secs) = run_once()?;
        samples.push(secs);
        match &first {
            None => first = Some((t, stats)),
            Some((t0, s0)) => {
                if *t0 != t || s0.memory_cost != stats.memory_cost {
                    return Err(HarnessError::Nondeterministic(query.name.clone()));
                }
            }
        }
    }
    let (result, mut stats) = first.expect("at least one repetition");
    if config.enclave == EnclaveMode::Off {
        let mut native = new_sim(&cal.native_sim())?;
        let (_, s) = execute(&query.plan, &tables, &engine, Some(&mut native))?;
        stats.memory_cost = s.memory_cost;
    }
    let cost = cal.modeled(&stats, config.encryption);
    let sim = match (&stats.sim, &sim_config) {
        (Some(r), Some(c)) if config.enclave != EnclaveMode::Off => {
            Some(SimCounters::new(r, pages(c.epc_capacity_bytes)))
        }
        _ => None,
    };
    Ok(Record::Ok(QueryRecord {
        config: config.name.clone(),
        query: query.name.clone(),
        mean_s: samples.iter().sum::<f64>() / samples.len() as f64,
        samples_s: samples,
        modeled_cost: cost.total,
        cost,
        rows_processed: stats.rows_processed(),
        result_rows: result.num_rows() as u64,
        bytes_read: stats.scan.bytes_read,
        bytes_decrypted: stats.scan.bytes_decrypted,
        bytes_decompressed: stats.scan.bytes_decompressed,
        physical_reads: stats.scan.physical_reads,
        sim,
    }))
}

/// Runs every query under every configuration, one configuration at a time,
/// and writes `report.json`, `report.csv` and `summary.txt` to `out`.
pub fn sweep(
    matrix: &[SweepConfig],
    queries: &[QuerySpec],
    reps: usize,
    baseline: &str,
    out: Option<&Path>,
    opts: &HarnessOptions,
) -> Result<SweepReport, HarnessError> {
    for c in matrix {
        c.validate()?;
    }
    if matrix.iter().all(|c| c.infeasible_reason().is_some()) {
        return Err(HarnessError::AllInfeasible);
    }
    match matrix.iter().find(|c| c.name == baseline) {
        Some(b) if b.infeasible_reason().is_none() => {}
        _ => return Err(HarnessError::Baseline(baseline.to_owned())),
    }
    let mut datasets: HashMap<(u32, u64), Dataset> = HashMap::new();
    let mut records = Vec::with_capacity(matrix.len() * queries.len());
    for c in matrix {
        let ds = datasets
            .entry((c.scale, c.seed))
            .or_insert_with(|| Dataset::generate(c.scale, c.seed));
        for q in queries {
            records.push(run_query(q, c, reps, ds, opts)?);
        }
    }
    let names: Vec<String> = matrix.iter().map(|c| c.name.clone()).collect();
    let mut report = SweepReport::derive(baseline, &names, records)?;
    if let Some(ds) = datasets.values_mut().next() {
        report.codec_ratio = Some(ds.codec_ratio(opts)?);
    }
    if let Some(dir) = out {
        report.write(dir)?;
    }
    Ok(report)
}

/// Eleven reference configurations, named by bar colour.
pub fn colour_matrix(scale: u32, seed: u64, threads: usize) -> Vec<SweepConfig> {
    use CodecKind::{Lightweight as L, Uncompressed as U};
    use EnclaveMode::*;
    use Encryption::*;
    let arena = AllocatorModel::ArenaReuse;
    let bars = [
        ("light-blue", U, None, Off, arena),
        ("blue", L, None, Off, arena),
        ("light-green", U, SoftwareAes, Off, arena),
        ("green", L, SoftwareAes, Off, arena),
        ("pink", U, HardwareAes, Off, arena),
        ("red", L, HardwareAes, Off, arena),
        (
            "light-orange",
            L,
            HardwareAes,
            SimFit,
            AllocatorModel::MapHeavy,
        ),
        ("light-purple", L, HardwareAes, SimFit, arena),
        ("dark-purple", L, HardwareAes, SimRemoteNuma, arena),
        ("yellow", U, HardwareAes, SimOverrun, arena),
        ("orange", L, HardwareAes, SimOverrun, arena),
    ];
    bars.into_iter()
        .map(
            |(name, codec, encryption, enclave, allocator)| SweepConfig {
                name: name.to_owned(),
                scale,
                codec,
                encryption,
                enclave,
                allocator,
                threads,
                seed,
            },
        )
        .collect()
}

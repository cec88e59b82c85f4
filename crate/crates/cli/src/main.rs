use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use confbench::crypto::{bench_throughput, best_backend, detect_backends, AesKey, CipherMode};
use confbench::engine::{execute, parse_plan, EngineConfig, TableFile};
use confbench::harness::{
    colour_matrix, default_queries, parse_query_file, sweep, Dataset, HarnessOptions, QuerySpec,
    SweepConfig,
};
use confbench::sim::{AllocatorModel, SimConfig, SimState};
use confbench::store::{CodecKind, EncryptionMode};

const EXT: &str = "cenc";

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Confidential analytics benchmark driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration matrix and write report.json, report.csv and summary.txt.
    Sweep(SweepArgs),
    /// Generate the tables and write them as column files.
    Gen(GenArgs),
    /// Run one query over column files on disk.
    Run(RunArgs),
    /// Measure AES throughput of each available backend.
    CryptoBench(CryptoArgs),
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 10)]
    scale: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value = "light-blue")]
    baseline: String,
    /// JSON list of configurations; defaults to the eleven colour-named bars.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Query file in plan notation; defaults to the bundled suite.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// JSON cost calibration overriding the defaults.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Codec {
    Uncompressed,
    Lightweight,
}

impl From<Codec> for CodecKind {
    fn from(c: Codec) -> Self {
        match c {
            Codec::Uncompressed => CodecKind::Uncompressed,
            Codec::Lightweight => CodecKind::Lightweight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    None,
    GcmAll,
    GcmCtrPages,
}

impl From<Mode> for EncryptionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::None => EncryptionMode::None,
            Mode::GcmAll => EncryptionMode::GcmAll,
            Mode::GcmCtrPages => EncryptionMode::GcmCtrPages,
        }
    }
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    scale: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value = "lightweight")]
    codec: Codec,
    #[arg(long, value_enum, default_value = "gcm-all")]
    encryption: Mode,
    #[arg(long, default_value_t = 16_384)]
    row_group_rows: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Allocator {
    ArenaReuse,
    MapHeavy,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Query name from the suite (or from --queries).
    #[arg(long, conflicts_with = "plan")]
    query: Option<String>,
    /// Plan in plan notation.
    #[arg(long)]
    plan: Option<String>,
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Hex AES key for encrypted files.
    #[arg(long)]
    key: Option<String>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 2048)]
    vector_capacity: usize,
    #[arg(long, default_value_t = 2048)]
    preagg_slots: usize,
    #[arg(long, default_value_t = 4)]
    partition_bits: u32,
    /// Attach the enclave simulator with this EPC capacity.
    #[arg(long)]
    epc_mib: Option<u64>,
    #[arg(long, value_enum, default_value = "arena-reuse")]
    allocator: Allocator,
    /// Print execution statistics as JSON after the rows.
    #[arg(long)]
    stats: bool,
    /// Print at most this many rows.
    #[arg(long, default_value_t = 50)]
    limit: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CryptoMode {
    Gcm,
    Ctr,
}

#[derive(clap::Args)]
struct CryptoArgs {
    #[arg(long, default_value_t = 1 << 20)]
    bytes: usize,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, value_enum, default_value = "gcm")]
    mode: CryptoMode,
}

fn load_queries(path: Option<&Path>) -> Result<Vec<QuerySpec>> {
    match path {
        Some(p) => {
            let src =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(parse_query_file(&src)?)
        }
        None => Ok(default_queries()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T> {
    let s = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", p.display()))
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let matrix: Vec<SweepConfig> = match &a.matrix {
        Some(p) => read_json(p)?,
        None => colour_matrix(a.scale, a.seed, a.threads),
    };
    let queries = load_queries(a.queries.as_deref())?;
    let mut opts = HarnessOptions::default();
    if let Some(p) = &a.calibration {
        opts.calibration = read_json(p)?;
    }
    let report = sweep(&matrix, &queries, a.reps, &a.baseline, Some(&a.out), &opts)?;
    print!("{}", report.summary());
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut ds = Dataset::generate(a.scale, a.seed);
    let mode: EncryptionMode = a.encryption.into();
    let opts = HarnessOptions {
        row_group_rows: a.row_group_rows,
        encryption_mode: mode,
        ..HarnessOptions::default()
    };
    let files = ds.files(a.codec.into(), mode != EncryptionMode::None, &opts)?;
    std::fs::create_dir_all(&a.out)?;
    for (name, bytes) in files.iter() {
        let path = a.out.join(format!("{name}.{EXT}"));
        std::fs::write(&path, bytes)?;
        println!("{} {} bytes", path.display(), bytes.len());
    }
    if mode != EncryptionMode::None {
        println!("key {}", hex::encode(ds.key().as_bytes()));
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let plan = match (&a.plan, &a.query) {
        (Some(text), _) => parse_plan(text)?,
        (None, Some(name)) => {
            load_queries(a.queries.as_deref())?
                .into_iter()
                .find(|q| &q.name == name)
                .with_context(|| format!("no query named {name}"))?
                .plan
        }
        (None, None) => bail!("pass --query or --plan"),
    };
    let key = a
        .key
        .as_deref()
        .map(|k| -> Result<AesKey> { Ok(AesKey::new(&hex::decode(k.trim())?)?) })
        .transpose()?;

    let mut bytes = BTreeMap::new();
    for entry in
        std::fs::read_dir(&a.data).with_context(|| format!("reading {}", a.data.display()))?
    {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == EXT) {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            bytes.insert(name, std::fs::read(&path)?);
        }
    }
    let tables: BTreeMap<String, TableFile<'_>> = bytes
        .iter()
        .map(|(n, b)| {
            let f = match &key {
                Some(k) => TableFile::encrypted(b, k.clone(), best_backend()),
                None => TableFile::plain(b),
            };
            (n.clone(), f)
        })
        .collect();

    let config = EngineConfig {
        threads: a.threads,
        vector_capacity: a.vector_capacity,
        preagg_slots: a.preagg_slots,
        partition_bits: a.partition_bits,
        ..EngineConfig::default()
    };
    let mut sim = a
        .epc_mib
        .map(|mib| {
            let allocator = match a.allocator {
                Allocator::ArenaReuse => AllocatorModel::ArenaReuse,
                Allocator::MapHeavy => AllocatorModel::MapHeavy,
            };
            SimState::new(SimConfig::with_capacity(mib << 20, allocator))
        })
        .transpose()?;
    let (result, stats) = execute(&plan, &tables, &config, sim.as_mut())?;

    let names: Vec<&str> = result.schema.iter().map(|f| f.name.as_str()).collect();
    println!("{}", names.join("\t"));
    for i in 0..result.num_rows().min(a.limit) {
        let row: Vec<String> = result.row(i).iter().map(ToString::to_string).collect();
        println!("{}", row.join("\t"));
    }
    if result.num_rows() > a.limit {
        println!("... {} rows", result.num_rows());
    }
    if a.stats {
        println!("{}", serde_json::to_string_pretty(&stats)?);
        if let Some(sim) = &sim {
            println!("{}", serde_json::to_string_pretty(&sim.report())?);
        }
    }
    Ok(())
}

fn cmd_crypto(a: CryptoArgs) -> Result<()> {
    let mode = match a.mode {
        CryptoMode::Gcm => CipherMode::Gcm,
        CryptoMode::Ctr => CipherMode::Ctr,
    };
    let mut rates = Vec::new();
    for backend in detect_backends() {
        let bps = bench_throughput(backend, mode, a.bytes, a.iterations)?;
        println!("{backend}\t{:.1} MB/s", bps / 1e6);
        rates.push(bps);
    }
    if let [sw, hw] = rates[..] {
        println!("ratio\t{:.2}", hw / sw);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::CryptoBench(a) => cmd_crypto(a),
    }
}

//! Morsel-driven execution. A plan is cut into pipelines at the blocking
//! operators (join build, aggregation, sort, limit). Each pipeline runs a
//! source, a chain of streaming steps and a sink on `threads` workers, with
//! morsel `i` going to worker `i % threads`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::agg::{merge_partitions, AggLayout, PreAggStats, PreAggTable, RadixPartitionSet};
use super::eval::eval_predicate;
use super::eval::eval_value;
use super::join::JoinTable;
use super::mem::{Handle, MemTracker, SimSink};
use super::plan::{Catalog, Expr, PlanError, PlanNode, SortKey};
use super::{EngineConfig, EngineError};
use crate::crypto::{AesKey, BackendKind};
use crate::sim::{SimReport, SimState};
use crate::store::{FileReader, ScanCounters};
use crate::vector::{Batch, Field, Table, Vector};

/// Materialized batches per morsel when a pipeline starts from an earlier
/// pipeline's output.
const FLOWS_PER_MORSEL: usize = 8;

/// An encrypted or plaintext table file and how to open it.
#[derive(Clone)]
pub struct TableFile<'a> {
    pub bytes: &'a [u8],
    pub key: Option<AesKey>,
    pub backend: BackendKind,
}

impl<'a> TableFile<'a> {
    pub fn plain(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            key: None,
            backend: crate::crypto::best_backend(),
        }
    }

    pub fn encrypted(bytes: &'a [u8], key: AesKey, backend: BackendKind) -> Self {
        Self {
            bytes,
            key: Some(key),
            backend,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OperatorStats {
    pub operator: &'static str,
    pub rows_in: u64,
    pub rows_out: u64,
    /// Time spent inside the operator, summed over workers.
    pub busy: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExecStats {
    /// One entry per plan node, in pre-order.
    pub operators: Vec<OperatorStats>,
    pub scan: ScanCounters,
    pub preagg: PreAggStats,
    pub wall: Duration,
    /// Simulator counters after the query, when a simulator was attached.
    pub sim: Option<SimReport>,
    /// Cost charged to the simulator by this query.
    pub memory_cost: Option<f64>,
}

impl ExecStats {
    /// Rows entering all operators; scans count the rows they produce.
    pub fn rows_processed(&self) -> u64 {
        self.operators.iter().map(|o| o.rows_in).sum()
    }
}

impl Serialize for PreAggStats {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PreAggStats", 3)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("flushes", &self.flushes)?;
        st.serialize_field("entries_emitted", &self.entries_emitted)?;
        st.end()
    }
}

struct Flow {
    batch: Batch,
    region: Handle,
}

enum Source {
    Scan {
        table: String,
        columns: Vec<usize>,
        op: usize,
    },
    Flows(Vec<Flow>),
}

enum Step<'p> {
    Filter {
        predicate: &'p Expr,
        schema: Vec<Field>,
        used: Vec<usize>,
    },
    Project {
        exprs: &'p [(String, Expr)],
        schema: Vec<Field>,
        used: Vec<usize>,
    },
    Probe {
        table: JoinTable,
        keys: Vec<usize>,
    },
}

struct Pipeline<'p> {
    source: Source,
    steps: Vec<(usize, Step<'p>)>,
}

enum Sink<'l> {
    Collect,
    PreAgg(&'l AggLayout),
}

enum Task {
    RowGroup(usize),
    Flows(Vec<Flow>),
}

struct WorkerOut {
    mem: MemTracker,
    ops: Vec<OperatorStats>,
    scan: ScanCounters,
    collected: Vec<(usize, Vec<Flow>)>,
    partitions: Option<(RadixPartitionSet, PreAggStats)>,
}

struct Exec<'a, 'c> {
    config: &'c EngineConfig,
    readers: BTreeMap<String, FileReader<'a>>,
    catalog: Catalog,
    sink: SimSink<'c>,
    main: MemTracker,
    next_namespace: u64,
    ops: Vec<OperatorStats>,
    scan: ScanCounters,
    preagg: PreAggStats,
}

/// Runs `plan` over `tables`. When `sim` is given, buffers, hash-table
/// probes and physical reads are charged to it.
pub fn execute(
    plan: &PlanNode,
    tables: &BTreeMap<String, TableFile<'_>>,
    config: &EngineConfig,
    sim: Option<&mut SimState>,
) -> Result<(Table, ExecStats), EngineError> {
    config.validate()?;
    let start = Instant::now();
    let mut readers = BTreeMap::new();
    let mut catalog = Catalog::new();
    for (name, t) in tables {
        let mut r = FileReader::open(t.bytes, t.key.as_ref(), t.backend)?;
        r.set_read_chunk(config.read_chunk);
        catalog.insert(name.clone(), r.footer().schema.clone());
        readers.insert(name.clone(), r);
    }
    let schema = plan.output_schema(&catalog)?;
    let cost_before = sim.as_ref().map(|s| s.report().accumulated_cost);
    let enabled = sim.is_some();
    let mut ex = Exec {
        config,
        readers,
        catalog,
        sink: SimSink::new(sim),
        main: MemTracker::new(0, enabled, config.cache_resident_bytes),
        next_namespace: 1,
        ops: Vec::new(),
        scan: ScanCounters::default(),
        preagg: PreAggStats::default(),
    };
    ex.main.ecall(0);
    let p = ex.pipeline(plan)?;
    let flows = ex.collect(p)?;
    let mut columns: Vec<Vector> = schema.iter().map(|f| Vector::empty(f.ty)).collect();
    for f in &flows {
        let b = f.batch.clone().compact();
        for (c, v) in columns.iter_mut().zip(&b.columns) {
            c.append(v);
        }
        ex.main.free(f.region);
    }
    ex.main.drain_into(&mut ex.sink)?;
    ex.sink.release_all()?;
    let report = ex.sink.sim.as_ref().map(|s| s.report());
    let stats = ExecStats {
        operators: ex.ops,
        scan: ex.scan,
        preagg: ex.preagg,
        wall: start.elapsed(),
        memory_cost: report
            .as_ref()
            .zip(cost_before)
            .map(|(r, b)| r.accumulated_cost - b),
        sim: report,
    };
    Ok((Table::new(schema, columns), stats))
}

fn column_positions(schema: &[Field], expr: &Expr) -> Vec<usize> {
    let mut names = Vec::new();
    expr.columns(&mut names);
    let mut idx: Vec<usize> = names
        .iter()
        .filter_map(|n| schema.iter().position(|f| &f.name == n))
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn used_bytes(batch: &Batch, used: &[usize]) -> u64 {
    used.iter()
        .map(|&i| batch.columns[i].byte_size() as u64)
        .sum()
}

fn find(schema: &[Field], name: &str) -> Result<usize, PlanError> {
    schema
        .iter()
        .position(|f| f.name == name)
        .ok_or_else(|| PlanError::UnknownColumn(name.to_owned()))
}

impl<'a, 'c> Exec<'a, 'c> {
    fn new_op(&mut self, node: &PlanNode) -> usize {
        self.ops.push(OperatorStats {
            operator: node.name(),
            ..Default::default()
        });
        self.ops.len() - 1
    }

    fn tracker(&mut self) -> MemTracker {
        let ns = self.next_namespace;
        self.next_namespace += 1;
        MemTracker::new(ns, self.sink.enabled(), self.config.cache_resident_bytes)
    }

    /// Turns `node` into a pipeline, running every blocking child first.
    fn pipeline<'p>(&mut self, node: &'p PlanNode) -> Result<Pipeline<'p>, EngineError> {
        let op = self.new_op(node);
        Ok(match node {
            PlanNode::Scan { table, columns } => {
                let schema = &self.catalog[table];
                let columns = columns
                    .iter()
                    .map(|c| find(schema, c))
                    .collect::<Result<_, _>>()?;
                Pipeline {
                    source: Source::Scan {
                        table: table.clone(),
                        columns,
                        op,
                    },
                    steps: Vec::new(),
                }
            }
            PlanNode::Filter { input, predicate } => {
                let schema = input.output_schema(&self.catalog)?;
                let used = column_positions(&schema, predicate);
                let mut p = self.pipeline(input)?;
                p.steps.push((
                    op,
                    Step::Filter {
                        predicate,
                        schema,
                        used,
                    },
                ));
                p
            }
            PlanNode::Project { input, exprs } => {
                let schema = input.output_schema(&self.catalog)?;
                let mut used: Vec<usize> = exprs
                    .iter()
                    .flat_map(|(_, e)| column_positions(&schema, e))
                    .collect();
                used.sort_unstable();
                used.dedup();
                let mut p = self.pipeline(input)?;
                p.steps.push((
                    op,
                    Step::Project {
                        exprs,
                        schema,
                        used,
                    },
                ));
                p
            }
            PlanNode::HashJoin {
                probe,
                build,
                probe_keys,
                build_keys,
            } => {
                let probe_schema = probe.output_schema(&self.catalog)?;
                let build_schema = build.output_schema(&self.catalog)?;
                let pk = probe_keys
                    .iter()
                    .map(|k| find(&probe_schema, k))
                    .collect::<Result<Vec<_>, _>>()?;
                let bk = build_keys
                    .iter()
                    .map(|k| find(&build_schema, k))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut p = self.pipeline(probe)?;
                let bp = self.pipeline(build)?;
                let flows = self.collect(bp)?;
                let started = Instant::now();
                let (columns, data) = self.concat(&build_schema, flows);
                let rows = columns.first().map_or(0, Vector::len) as u64;
                let table =
                    JoinTable::build(columns, &bk, self.config.hash_seed, data, &mut self.main);
                self.ops[op].busy += started.elapsed();
                self.ops[op].rows_in += rows;
                p.steps.push((op, Step::Probe { table, keys: pk }));
                p
            }
            PlanNode::HashAggregate {
                input,
                group_by,
                aggregates,
            } => {
                let schema = input.output_schema(&self.catalog)?;
                let layout = AggLayout::new(&schema, group_by, aggregates)?;
                let p = self.pipeline(input)?;
                let flows = self.aggregate(p, &layout, op)?;
                Pipeline {
                    source: Source::Flows(flows),
                    steps: Vec::new(),
                }
            }
            PlanNode::OrderBy { input, keys } => {
                let schema = input.output_schema(&self.catalog)?;
                let p = self.pipeline(input)?;
                let flows = self.collect(p)?;
                let flows = self.sort(&schema, flows, keys, op)?;
                Pipeline {
                    source: Source::Flows(flows),
                    steps: Vec::new(),
                }
            }
            PlanNode::Limit { input, count } => {
                let p = self.pipeline(input)?;
                let flows = self.collect(p)?;
                let flows = self.limit(flows, *count, op);
                Pipeline {
                    source: Source::Flows(flows),
                    steps: Vec::new(),
                }
            }
        })
    }

    /// Concatenates flows into columns held in one tracked buffer.
    fn concat(&mut self, schema: &[Field], flows: Vec<Flow>) -> (Vec<Vector>, Handle) {
        let mut columns: Vec<Vector> = schema.iter().map(|f| Vector::empty(f.ty)).collect();
        for f in &flows {
            let b = f.batch.clone().compact();
            self.main.read(f.region, b.byte_size() as u64);
            for (c, v) in columns.iter_mut().zip(&b.columns) {
                c.append(v);
            }
        }
        let bytes: u64 = columns.iter().map(|c| c.byte_size() as u64).sum();
        let h = self.main.write_new(bytes);
        for f in flows {
            self.main.free(f.region);
        }
        (columns, h)
    }

    fn split(&mut self, columns: Vec<Vector>) -> Vec<Flow> {
        let rows = columns.first().map_or(0, Vector::len);
        let cap = self.config.vector_capacity;
        (0..rows)
            .step_by(cap)
            .map(|s| {
                let e = (s + cap).min(rows);
                let batch = Batch::new(columns.iter().map(|c| c.slice(s, e)).collect());
                let region = self.main.write_new(batch.byte_size() as u64);
                Flow { batch, region }
            })
            .collect()
    }

    fn collect(&mut self, p: Pipeline<'_>) -> Result<Vec<Flow>, EngineError> {
        let outs = self.run(p, Sink::Collect)?;
        let mut all: Vec<(usize, Vec<Flow>)> = outs.into_iter().flat_map(|o| o.collected).collect();
        all.sort_by_key(|(i, _)| *i);
        Ok(all.into_iter().flat_map(|(_, f)| f).collect())
    }

    fn aggregate(
        &mut self,
        p: Pipeline<'_>,
        layout: &AggLayout,
        op: usize,
    ) -> Result<Vec<Flow>, EngineError> {
        let outs = self.run(p, Sink::PreAgg(layout))?;
        let started = Instant::now();
        let mut set = RadixPartitionSet::new(self.config.partition_bits, layout.agg_count());
        for o in outs {
            if let Some((s, st)) = o.partitions {
                self.preagg.rows += st.rows;
                self.preagg.flushes += st.flushes;
                self.preagg.entries_emitted += st.entries_emitted;
                self.ops[op].rows_in += st.rows;
                set.absorb(s);
            }
        }
        let threads = self.config.threads;
        let mut trackers: Vec<MemTracker> = (0..threads).map(|_| self.tracker()).collect();
        let parts = merge_partitions(
            &set,
            layout,
            threads,
            &mut trackers,
            self.config.cache_resident_bytes,
            true,
        );
        for t in &mut trackers {
            t.drain_into(&mut self.sink)?;
        }
        let mut columns = super::agg::empty_columns(layout);
        for cols in parts.into_iter().flatten() {
            for (c, v) in columns.iter_mut().zip(&cols) {
                c.append(v);
            }
        }
        self.ops[op].rows_out += columns.first().map_or(0, Vector::len) as u64;
        self.ops[op].busy += started.elapsed();
        Ok(self.split(columns))
    }

    fn sort(
        &mut self,
        schema: &[Field],
        flows: Vec<Flow>,
        keys: &[SortKey],
        op: usize,
    ) -> Result<Vec<Flow>, EngineError> {
        let started = Instant::now();
        let (columns, data) = self.concat(schema, flows);
        let rows = columns.first().map_or(0, Vector::len);
        let key_cols: Vec<(&Vector, bool)> = keys
            .iter()
            .map(|k| Ok((&columns[find(schema, &k.column)?], k.descending)))
            .collect::<Result<_, PlanError>>()?;
        let mut perm: Vec<u32> = (0..rows as u32).collect();
        perm.sort_by(|&a, &b| compare_rows(&key_cols, a as usize, b as usize));
        let bytes: u64 = columns.iter().map(|c| c.byte_size() as u64).sum();
        let kind = self.main.probe_kind(bytes, false);
        self.main.touch(data, 0, bytes, kind);
        let sorted: Vec<Vector> = columns.iter().map(|c| c.gather(&perm)).collect();
        self.main.free(data);
        let out = self.split(sorted);
        self.ops[op].rows_in += rows as u64;
        self.ops[op].rows_out += rows as u64;
        self.ops[op].busy += started.elapsed();
        Ok(out)
    }

    fn limit(&mut self, flows: Vec<Flow>, count: usize, op: usize) -> Vec<Flow> {
        let mut left = count;
        let mut out = Vec::new();
        for mut f in flows {
            let n = f.batch.active_count();
            self.ops[op].rows_in += n as u64;
            if left == 0 {
                self.main.free(f.region);
                continue;
            }
            if n > left {
                let keep = f.batch.active_rows()[..left].to_vec();
                f.batch.set_selection(keep);
            }
            left -= n.min(left);
            self.ops[op].rows_out += f.batch.active_count() as u64;
            out.push(f);
        }
        out
    }

    fn run(&mut self, p: Pipeline<'_>, sink: Sink<'_>) -> Result<Vec<WorkerOut>, EngineError> {
        let threads = self.config.threads;
        self.main.drain_into(&mut self.sink)?;
        let mut tasks: Vec<Vec<(usize, Task)>> = (0..threads).map(|_| Vec::new()).collect();
        let (scan, steps) = match p.source {
            Source::Scan { table, columns, op } => {
                let n = self.readers[&table].num_row_groups();
                for i in 0..n {
                    tasks[i % threads].push((i, Task::RowGroup(i)));
                }
                (Some((table, columns, op)), p.steps)
            }
            Source::Flows(flows) => {
                let mut it = flows.into_iter().peekable();
                let mut i = 0;
                while it.peek().is_some() {
                    let chunk: Vec<Flow> = it.by_ref().take(FLOWS_PER_MORSEL).collect();
                    tasks[i % threads].push((i, Task::Flows(chunk)));
                    i += 1;
                }
                (None, p.steps)
            }
        };
        let trackers: Vec<MemTracker> = (0..threads).map(|_| self.tracker()).collect();
        let nops = self.ops.len();
        let shared = Shared {
            config: self.config,
            readers: &self.readers,
            scan: scan
                .as_ref()
                .map(|(t, c, o)| (t.as_str(), c.as_slice(), *o)),
            steps: &steps,
            sink: &sink,
            nops,
        };
        let results: Vec<Result<WorkerOut, EngineError>> = if threads == 1 {
            let (t, m) = (tasks.pop().unwrap(), trackers.into_iter().next().unwrap());
            vec![shared.work(t, m)]
        } else {
            std::thread::scope(|s| {
                let shared = &shared;
                let handles: Vec<_> = tasks
                    .into_iter()
                    .zip(trackers)
                    .map(|(t, m)| s.spawn(move || shared.work(t, m)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("pipeline worker panicked"))
                    .collect()
            })
        };
        let mut outs = Vec::with_capacity(threads);
        for r in results {
            let mut o = r?;
            o.mem.drain_into(&mut self.sink)?;
            for (mine, theirs) in self.ops.iter_mut().zip(&o.ops) {
                mine.rows_in += theirs.rows_in;
                mine.rows_out += theirs.rows_out;
                mine.busy += theirs.busy;
            }
            self.scan.add(&o.scan);
            outs.push(o);
        }
        for (_, step) in steps {
            if let Step::Probe { table, .. } = step {
                table.release(&mut self.main);
            }
        }
        Ok(outs)
    }
}

struct Shared<'s, 'a> {
    config: &'s EngineConfig,
    readers: &'s BTreeMap<String, FileReader<'a>>,
    scan: Option<(&'s str, &'s [usize], usize)>,
    steps: &'s [(usize, Step<'s>)],
    sink: &'s Sink<'s>,
    nops: usize,
}

impl Shared<'_, '_> {
    fn work(
        &self,
        tasks: Vec<(usize, Task)>,
        mut mem: MemTracker,
    ) -> Result<WorkerOut, EngineError> {
        let mut ops = vec![OperatorStats::default(); self.nops];
        let mut scan = ScanCounters::default();
        let mut collected = Vec::new();
        let mut partitions = match self.sink {
            Sink::PreAgg(layout) => Some((
                PreAggTable::new(
                    layout,
                    self.config.preagg_slots,
                    self.config.hash_seed,
                    &mut mem,
                ),
                RadixPartitionSet::new(self.config.partition_bits, layout.agg_count()),
            )),
            Sink::Collect => None,
        };
        for (idx, task) in tasks {
            let input = match task {
                Task::RowGroup(rg) => self.scan_row_group(rg, &mut mem, &mut scan, &mut ops)?,
                Task::Flows(f) => f,
            };
            let mut out = Vec::new();
            for flow in input {
                self.push(flow, 0, &mut mem, &mut ops, &mut out);
            }
            match &mut partitions {
                Some((table, set)) => {
                    for f in out {
                        mem.read(f.region, f.batch.byte_size() as u64);
                        table.add_batch(&f.batch, set, &mut mem);
                        mem.free(f.region);
                    }
                }
                None => collected.push((idx, out)),
            }
        }
        let partitions = partitions.map(|(table, mut set)| {
            let stats = table.finish(&mut set, &mut mem);
            (set, stats)
        });
        Ok(WorkerOut {
            mem,
            ops,
            scan,
            collected,
            partitions,
        })
    }

    fn scan_row_group(
        &self,
        rg: usize,
        mem: &mut MemTracker,
        counters: &mut ScanCounters,
        ops: &mut [OperatorStats],
    ) -> Result<Vec<Flow>, EngineError> {
        let (table, columns, op) = self.scan.expect("scan source");
        let started = Instant::now();
        let reader = &self.readers[table];
        let read_chunk = self.config.read_chunk as u64;
        let mut vectors = Vec::with_capacity(columns.len());
        for &c in columns {
            let meta = &reader.footer().row_group_index[rg].columns[c];
            let mut obs = ScanCounters::default();
            let v = reader.read_column_chunk(rg, c, &mut obs)?;
            let buf = mem.alloc(meta.on_disk_len);
            let mut off = 0;
            while off < meta.on_disk_len {
                let n = read_chunk.min(meta.on_disk_len - off);
                mem.ocall(n);
                mem.touch(buf, off, n, crate::sim::AccessKind::SequentialWrite);
                off += n;
            }
            mem.read(buf, meta.on_disk_len);
            if obs.bytes_decompressed > 0 {
                let raw = mem.write_new(obs.bytes_decompressed);
                mem.read(raw, obs.bytes_decompressed);
                mem.free(raw);
            }
            mem.free(buf);
            counters.add(&obs);
            vectors.push(v);
        }
        let rows = vectors.first().map_or(0, Vector::len);
        let cap = self.config.vector_capacity;
        let flows: Vec<Flow> = (0..rows)
            .step_by(cap)
            .map(|s| {
                let e = (s + cap).min(rows);
                let batch = Batch::new(vectors.iter().map(|v| v.slice(s, e)).collect());
                let region = mem.write_new(batch.byte_size() as u64);
                Flow { batch, region }
            })
            .collect();
        ops[op].rows_in += rows as u64;
        ops[op].rows_out += rows as u64;
        ops[op].busy += started.elapsed();
        Ok(flows)
    }

    /// Pushes one flow through the steps from `from` on.
    fn push(
        &self,
        flow: Flow,
        from: usize,
        mem: &mut MemTracker,
        ops: &mut [OperatorStats],
        out: &mut Vec<Flow>,
    ) {
        let Some((op, step)) = self.steps.get(from) else {
            out.push(flow);
            return;
        };
        let started = Instant::now();
        let Flow { mut batch, region } = flow;
        let rows_in = batch.active_count() as u64;
        let mut next: Vec<Flow> = Vec::new();
        match step {
            Step::Filter {
                predicate,
                schema,
                used,
            } => {
                mem.read(region, used_bytes(&batch, used));
                let sel = eval_predicate(predicate, schema, &batch, &batch.active_rows());
                if sel.is_empty() {
                    mem.free(region);
                } else {
                    batch.set_selection(sel);
                    next.push(Flow { batch, region });
                }
            }
            Step::Project {
                exprs,
                schema,
                used,
            } => {
                mem.read(region, used_bytes(&batch, used));
                let sel = batch.active_rows();
                let cols = exprs
                    .iter()
                    .map(|(_, e)| eval_value(e, schema, &batch, &sel))
                    .collect();
                let b = Batch::with_len(cols, sel.len());
                let r = mem.write_new(b.byte_size() as u64);
                mem.free(region);
                next.push(Flow {
                    batch: b,
                    region: r,
                });
            }
            Step::Probe { table, keys } => {
                mem.read(region, used_bytes(&batch, keys));
                let mut produced = Vec::new();
                table.probe(
                    &batch,
                    keys,
                    self.config.vector_capacity,
                    mem,
                    &mut produced,
                );
                for b in produced {
                    let r = mem.write_new(b.byte_size() as u64);
                    next.push(Flow {
                        batch: b,
                        region: r,
                    });
                }
                mem.free(region);
            }
        }
        ops[*op].rows_in += rows_in;
        ops[*op].rows_out += next
            .iter()
            .map(|f| f.batch.active_count() as u64)
            .sum::<u64>();
        ops[*op].busy += started.elapsed();
        for f in next {
            self.push(f, from + 1, mem, ops, out);
        }
    }
}

fn compare_rows(keys: &[(&Vector, bool)], a: usize, b: usize) -> Ordering {
    for (col, desc) in keys {
        let ord = match col {
            Vector::Int64(v) => v[a].cmp(&v[b]),
            Vector::Float64(v) => v[a].total_cmp(&v[b]),
            Vector::Date(v) => v[a].cmp(&v[b]),
            Vector::Str(v) => v.get_bytes(a).cmp(v.get_bytes(b)),
        };
        let ord = if *desc { ord.reverse() } else { ord };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    Ordering::Equal
}

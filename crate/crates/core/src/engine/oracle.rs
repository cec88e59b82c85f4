//! Row-at-a-time reference evaluator. It shares no hashing or vector code
//! with the engine: groups live in an ordered map, joins are nested loops.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::plan::{AggFunc, ArithOp, Catalog, Expr, PlanError, PlanNode};
use crate::vector::{Field, Scalar, Table};

type Row = Vec<Scalar>;

#[derive(Debug, Clone)]
struct Key(Vec<Scalar>);

impl PartialEq for Key {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(&o.0) {
            match a.total_cmp(b) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        self.0.len().cmp(&o.0.len())
    }
}

/// Evaluates `plan` over in-memory tables.
pub fn oracle_execute(
    plan: &PlanNode,
    tables: &BTreeMap<String, Table>,
) -> Result<Table, PlanError> {
    let catalog: Catalog = tables
        .iter()
        .map(|(n, t)| (n.clone(), t.schema.clone()))
        .collect();
    let schema = plan.output_schema(&catalog)?;
    let rows = run(plan, tables, &catalog)?;
    Ok(Table::from_rows(schema, &rows))
}

fn pos(schema: &[Field], name: &str) -> usize {
    schema
        .iter()
        .position(|f| f.name == name)
        .expect("validated")
}

fn run(
    plan: &PlanNode,
    tables: &BTreeMap<String, Table>,
    cat: &Catalog,
) -> Result<Vec<Row>, PlanError> {
    Ok(match plan {
        PlanNode::Scan { table, columns } => {
            let t = &tables[table];
            let idx: Vec<usize> = columns.iter().map(|c| pos(&t.schema, c)).collect();
            (0..t.num_rows())
                .map(|r| idx.iter().map(|&i| t.columns[i].get(r)).collect())
                .collect()
        }
        PlanNode::Filter { input, predicate } => {
            let s = input.output_schema(cat)?;
            run(input, tables, cat)?
                .into_iter()
                .filter(|r| holds(predicate, &s, r))
                .collect()
        }
        PlanNode::Project { input, exprs } => {
            let s = input.output_schema(cat)?;
            run(input, tables, cat)?
                .iter()
                .map(|r| exprs.iter().map(|(_, e)| value(e, &s, r)).collect())
                .collect()
        }
        PlanNode::HashJoin {
            probe,
            build,
            probe_keys,
            build_keys,
        } => {
            let (ps, bs) = (probe.output_schema(cat)?, build.output_schema(cat)?);
            let pk: Vec<usize> = probe_keys.iter().map(|k| pos(&ps, k)).collect();
            let bk: Vec<usize> = build_keys.iter().map(|k| pos(&bs, k)).collect();
            let build_rows = run(build, tables, cat)?;
            let mut out = Vec::new();
            for p in run(probe, tables, cat)? {
                for b in &build_rows {
                    if pk
                        .iter()
                        .zip(&bk)
                        .all(|(&i, &j)| p[i].total_cmp(&b[j]) == Ordering::Equal)
                    {
                        out.push(p.iter().chain(b.iter()).cloned().collect());
                    }
                }
            }
            out
        }
        PlanNode::HashAggregate {
            input,
            group_by,
            aggregates,
        } => {
            let s = input.output_schema(cat)?;
            let gi: Vec<usize> = group_by.iter().map(|g| pos(&s, g)).collect();
            let mut groups: BTreeMap<Key, Vec<&Row>> = BTreeMap::new();
            let rows = run(input, tables, cat)?;
            for r in &rows {
                groups
                    .entry(Key(gi.iter().map(|&i| r[i].clone()).collect()))
                    .or_default()
                    .push(r);
            }
            groups
                .into_iter()
                .map(|(k, members)| {
                    let mut out = k.0;
                    for a in aggregates {
                        let vals: Vec<Scalar> = match &a.arg {
                            Some(e) => members.iter().map(|r| value(e, &s, r)).collect(),
                            None => Vec::new(),
                        };
                        out.push(aggregate(a.func, &vals, members.len()));
                    }
                    out
                })
                .collect()
        }
        PlanNode::OrderBy { input, keys } => {
            let s = input.output_schema(cat)?;
            let mut rows = run(input, tables, cat)?;
            let ks: Vec<(usize, bool)> = keys
                .iter()
                .map(|k| (pos(&s, &k.column), k.descending))
                .collect();
            rows.sort_by(|a, b| {
                for &(i, desc) in &ks {
                    let o = a[i].total_cmp(&b[i]);
                    let o = if desc { o.reverse() } else { o };
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            });
            rows
        }
        PlanNode::Limit { input, count } => {
            let mut rows = run(input, tables, cat)?;
            rows.truncate(*count);
            rows
        }
    })
}

fn aggregate(func: AggFunc, vals: &[Scalar], n: usize) -> Scalar {
    match func {
        AggFunc::Count => Scalar::Int(n as i64),
        AggFunc::Sum => sum(vals),
        AggFunc::Avg => match sum(vals) {
            Scalar::Int(s) => Scalar::Float(s as f64 / n as f64),
            Scalar::Float(s) => Scalar::Float(s / n as f64),
            _ => unreachable!(),
        },
        AggFunc::Min => vals
            .iter()
            .min_by(|a, b| a.total_cmp(b))
            .cloned()
            .expect("non-empty group"),
        AggFunc::Max => vals
            .iter()
            .rev()
            .max_by(|a, b| a.total_cmp(b))
            .cloned()
            .expect("non-empty group"),
    }
}

fn sum(vals: &[Scalar]) -> Scalar {
    match vals.first() {
        Some(Scalar::Int(_)) => Scalar::Int(vals.iter().fold(0i64, |s, v| match v {
            Scalar::Int(x) => s.wrapping_add(*x),
            _ => unreachable!(),
        })),
        _ => Scalar::Float(vals.iter().map(|v| v.as_f64().unwrap()).sum()),
    }
}

fn value(e: &Expr, s: &[Field], r: &Row) -> Scalar {
    match e {
        Expr::Col(c) => r[pos(s, c)].clone(),
        Expr::Lit(v) => v.clone(),
        Expr::Arith(op, a, b) => {
            let (a, b) = (value(a, s, r), value(b, s, r));
            match (op, &a, &b) {
                (ArithOp::Add, Scalar::Int(x), Scalar::Int(y)) => Scalar::Int(x.wrapping_add(*y)),
                (ArithOp::Sub, Scalar::Int(x), Scalar::Int(y)) => Scalar::Int(x.wrapping_sub(*y)),
                (ArithOp::Mul, Scalar::Int(x), Scalar::Int(y)) => Scalar::Int(x.wrapping_mul(*y)),
                _ => {
                    let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                    Scalar::Float(match op {
                        ArithOp::Add => x + y,
                        ArithOp::Sub => x - y,
                        ArithOp::Mul => x * y,
                        ArithOp::Div => x / y,
                    })
                }
            }
        }
        _ => panic!("predicate in value position"),
    }
}

fn holds(e: &Expr, s: &[Field], r: &Row) -> bool {
    match e {
        Expr::Cmp(op, a, b) => op.holds(value(a, s, r).total_cmp(&value(b, s, r))),
        Expr::And(xs) => xs.iter().all(|x| holds(x, s, r)),
        Expr::Or(xs) => xs.iter().any(|x| holds(x, s, r)),
        Expr::Not(x) => !holds(x, s, r),
        Expr::InList(x, vs) => {
            let v = value(x, s, r);
            vs.iter().any(|c| v.total_cmp(c) == Ordering::Equal)
        }
        _ => panic!("value in predicate position"),
    }
}

fn close(a: &Scalar, b: &Scalar, rel_tol: f64) -> bool {
    match (a, b) {
        (Scalar::Float(x), Scalar::Float(y)) => {
            x == y || (x - y).abs() <= rel_tol * x.abs().max(y.abs())
        }
        _ => a == b,
    }
}

/// Compares two results. Without `ordered`, rows are compared as multisets.
/// Floats may differ by `rel_tol` relative error; everything else is exact.
pub fn results_equivalent(a: &Table, b: &Table, ordered: bool, rel_tol: f64) -> Result<(), String> {
    if a.schema != b.schema {
        return Err(format!("schemas differ: {:?} vs {:?}", a.schema, b.schema));
    }
    if a.num_rows() != b.num_rows() {
        return Err(format!(
            "row counts differ: {} vs {}",
            a.num_rows(),
            b.num_rows()
        ));
    }
    let (mut ra, mut rb) = (a.rows(), b.rows());
    if !ordered {
        let by = |x: &Row, y: &Row| Key(x.clone()).cmp(&Key(y.clone()));
        ra.sort_by(by);
        rb.sort_by(by);
    }
    for (i, (x, y)) in ra.iter().zip(&rb).enumerate() {
        if !x.iter().zip(y).all(|(p, q)| close(p, q, rel_tol)) {
            return Err(format!("row {i} differs: {x:?} vs {y:?}"));
        }
    }
    Ok(())
}

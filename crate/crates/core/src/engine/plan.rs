use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::vector::{Field, LogicalType, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("duplicate output column {0}")]
    DuplicateColumn(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid plan: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Col(String),
    Lit(Scalar),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    InList(Box<Expr>, Vec<Scalar>),
}

impl Expr {
    pub fn col(name: &str) -> Expr {
        Expr::Col(name.to_owned())
    }

    pub fn lit(s: Scalar) -> Expr {
        Expr::Lit(s)
    }

    pub fn arith(op: ArithOp, a: Expr, b: Expr) -> Expr {
        Expr::Arith(op, Box::new(a), Box::new(b))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn is_predicate(&self) -> bool {
        matches!(
            self,
            Expr::Cmp(..) | Expr::And(_) | Expr::Or(_) | Expr::Not(_) | Expr::InList(..)
        )
    }

    /// Type of a value expression over `schema`.
    pub fn value_type(&self, schema: &[Field]) -> Result<LogicalType, PlanError> {
        match self {
            Expr::Col(c) => schema
                .iter()
                .find(|f| &f.name == c)
                .map(|f| f.ty)
                .ok_or_else(|| PlanError::UnknownColumn(c.clone())),
            Expr::Lit(s) => Ok(s.logical_type()),
            Expr::Arith(op, a, b) => {
                let (ta, tb) = (a.value_type(schema)?, b.value_type(schema)?);
                if !ta.is_numeric() || !tb.is_numeric() {
                    return Err(PlanError::TypeMismatch(format!(
                        "arithmetic on {ta} and {tb}"
                    )));
                }
                Ok(
                    if *op == ArithOp::Div
                        || ta == LogicalType::Float64
                        || tb == LogicalType::Float64
                    {
                        LogicalType::Float64
                    } else {
                        LogicalType::Int64
                    },
                )
            }
            _ => Err(PlanError::TypeMismatch(
                "predicate used where a value is expected".into(),
            )),
        }
    }

    /// Checks a predicate expression over `schema`.
    pub fn check_predicate(&self, schema: &[Field]) -> Result<(), PlanError> {
        match self {
            Expr::Cmp(_, a, b) => comparable(a.value_type(schema)?, b.value_type(schema)?),
            Expr::And(xs) | Expr::Or(xs) => {
                if xs.is_empty() {
                    return Err(PlanError::Invalid("empty conjunction".into()));
                }
                xs.iter().try_for_each(|x| x.check_predicate(schema))
            }
            Expr::Not(x) => x.check_predicate(schema),
            Expr::InList(x, vs) => {
                let t = x.value_type(schema)?;
                vs.iter().try_for_each(|v| comparable(t, v.logical_type()))
            }
            _ => Err(PlanError::TypeMismatch(
                "value used where a predicate is expected".into(),
            )),
        }
    }

    pub fn columns(&self, out: &mut Vec<String>) {
        match self {
            Expr::Col(c) => out.push(c.clone()),
            Expr::Lit(_) => {}
            Expr::Arith(_, a, b) | Expr::Cmp(_, a, b) => {
                a.columns(out);
                b.columns(out);
            }
            Expr::And(xs) | Expr::Or(xs) => xs.iter().for_each(|x| x.columns(out)),
            Expr::Not(x) | Expr::InList(x, _) => x.columns(out),
        }
    }
}

fn comparable(a: LogicalType, b: LogicalType) -> Result<(), PlanError> {
    let ok = (a.is_numeric() && b.is_numeric())
        || matches!((a, b), (LogicalType::Date, LogicalType::Date))
        || matches!(
            (a, b),
            (LogicalType::FixedString(_), LogicalType::FixedString(_))
        );
    if ok {
        Ok(())
    } else {
        Err(PlanError::TypeMismatch(format!(
            "cannot compare {a} with {b}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFunc {
    Sum,
    Count,
    Min,
    Max,
    Avg,
}

impl fmt::Display for AggFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggFunc::Sum => "sum",
            AggFunc::Count => "count",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
            AggFunc::Avg => "avg",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub name: String,
    pub func: AggFunc,
    /// `None` only for `COUNT(*)`.
    pub arg: Option<Expr>,
}

impl Aggregate {
    pub fn output_type(&self, schema: &[Field]) -> Result<LogicalType, PlanError> {
        let arg = match &self.arg {
            None if self.func == AggFunc::Count => return Ok(LogicalType::Int64),
            None => {
                return Err(PlanError::Invalid(format!(
                    "{} needs an argument",
                    self.func
                )))
            }
            Some(a) => a.value_type(schema)?,
        };
        match self.func {
            AggFunc::Count => Ok(LogicalType::Int64),
            AggFunc::Min | AggFunc::Max => Ok(arg),
            AggFunc::Sum if arg.is_numeric() => Ok(arg),
            AggFunc::Avg if arg.is_numeric() => Ok(LogicalType::Float64),
            f => Err(PlanError::TypeMismatch(format!("{f} over {arg}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortKey {
    pub column: String,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanNode {
    Scan {
        table: String,
        columns: Vec<String>,
    },
    Filter {
        input: Box<PlanNode>,
        predicate: Expr,
    },
    Project {
        input: Box<PlanNode>,
        exprs: Vec<(String, Expr)>,
    },
    /// Inner equi-join. Output columns are the probe columns followed by the
    /// build columns.
    HashJoin {
        probe: Box<PlanNode>,
        build: Box<PlanNode>,
        probe_keys: Vec<String>,
        build_keys: Vec<String>,
    },
    HashAggregate {
        input: Box<PlanNode>,
        group_by: Vec<String>,
        aggregates: Vec<Aggregate>,
    },
    OrderBy {
        input: Box<PlanNode>,
        keys: Vec<SortKey>,
    },
    Limit {
        input: Box<PlanNode>,
        count: usize,
    },
}

/// Table schemas by name, used to validate plans.
pub type Catalog = BTreeMap<String, Vec<Field>>;

fn unique(fields: Vec<Field>) -> Result<Vec<Field>, PlanError> {
    let mut seen = HashSet::new();
    for f in &fields {
        if !seen.insert(f.name.clone()) {
            return Err(PlanError::DuplicateColumn(f.name.clone()));
        }
    }
    Ok(fields)
}

fn lookup(schema: &[Field], name: &str) -> Result<Field, PlanError> {
    schema
        .iter()
        .find(|f| f.name == name)
        .cloned()
        .ok_or_else(|| PlanError::UnknownColumn(name.to_owned()))
}

impl PlanNode {
    /// Validates the plan and returns its output schema.
    pub fn output_schema(&self, catalog: &Catalog) -> Result<Vec<Field>, PlanError> {
        match self {
            PlanNode::Scan { table, columns } => {
                let schema = catalog
                    .get(table)
                    .ok_or_else(|| PlanError::UnknownTable(table.clone()))?;
                if columns.is_empty() {
                    return Err(PlanError::Invalid(format!(
                        "scan of {table} selects no columns"
                    )));
                }
                unique(
                    columns
                        .iter()
                        .map(|c| lookup(schema, c))
                        .collect::<Result<_, _>>()?,
                )
            }
            PlanNode::Filter { input, predicate } => {
                let s = input.output_schema(catalog)?;
                predicate.check_predicate(&s)?;
                Ok(s)
            }
            PlanNode::Project { input, exprs } => {
                let s = input.output_schema(catalog)?;
                unique(
                    exprs
                        .iter()
                        .map(|(n, e)| Ok(Field::new(n.clone(), e.value_type(&s)?)))
                        .collect::<Result<_, PlanError>>()?,
                )
            }
            PlanNode::HashJoin {
                probe,
                build,
                probe_keys,
                build_keys,
            } => {
                let (ps, bs) = (probe.output_schema(catalog)?, build.output_schema(catalog)?);
                if probe_keys.len() != build_keys.len() || probe_keys.is_empty() {
                    return Err(PlanError::Invalid(
                        "join key lists must be non-empty and equally long".into(),
                    ));
                }
                for (p, b) in probe_keys.iter().zip(build_keys) {
                    let (tp, tb) = (lookup(&ps, p)?.ty, lookup(&bs, b)?.ty);
                    if tp != tb {
                        return Err(PlanError::TypeMismatch(format!(
                            "join key {p}: {tp} vs {b}: {tb}"
                        )));
                    }
                }
                unique(ps.into_iter().chain(bs).collect())
            }
            PlanNode::HashAggregate {
                input,
                group_by,
                aggregates,
            } => {
                let s = input.output_schema(catalog)?;
                let mut out = group_by
                    .iter()
                    .map(|g| lookup(&s, g))
                    .collect::<Result<Vec<_>, _>>()?;
                for a in aggregates {
                    out.push(Field::new(a.name.clone(), a.output_type(&s)?));
                }
                if out.is_empty() {
                    return Err(PlanError::Invalid(
                        "aggregate without groups or aggregates".into(),
                    ));
                }
                unique(out)
            }
            PlanNode::OrderBy { input, keys } => {
                let s = input.output_schema(catalog)?;
                for k in keys {
                    lookup(&s, &k.column)?;
                }
                Ok(s)
            }
            PlanNode::Limit { input, .. } => input.output_schema(catalog),
        }
    }

    pub fn has_order_by(&self) -> bool {
        match self {
            PlanNode::OrderBy { .. } => true,
            PlanNode::Limit { input, .. } => input.has_order_by(),
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PlanNode::Scan { .. } => "scan",
            PlanNode::Filter { .. } => "filter",
            PlanNode::Project { .. } => "project",
            PlanNode::HashJoin { .. } => "hash_join",
            PlanNode::HashAggregate { .. } => "hash_aggregate",
            PlanNode::OrderBy { .. } => "order_by",
            PlanNode::Limit { .. } => "limit",
        }
    }
}

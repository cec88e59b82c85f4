//! Textual plan notation: s-expressions, `;` starts a comment.
//!
//! ```text
//! (scan TABLE COL...)
//! (filter PRED INPUT)
//! (project ((NAME EXPR)...) INPUT)
//! (join (PROBE_KEY...) (BUILD_KEY...) PROBE BUILD)
//! (aggregate (GROUP_COL...) ((NAME (FUNC [EXPR]))...) INPUT)
//! (order ((COL asc|desc)...) INPUT)
//! (limit N INPUT)
//! ```
//!
//! Expressions are column names, integers, floats, `"strings"`,
//! `(date "YYYY-MM-DD")`, `(+ a b)` with `+ - * /`, `(= a b)` with
//! `= <> < <= > >=`, `(and p...)`, `(or p...)`, `(not p)` and
//! `(in e lit...)`. A query file is a list of `(query NAME CATEGORY PLAN)`.

use std::fmt;

use super::plan::{AggFunc, Aggregate, ArithOp, CmpOp, Expr, PlanError, PlanNode, SortKey};
use crate::vector::{format_date, parse_date, Scalar};

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

fn err<T>(m: impl Into<String>) -> Result<T, PlanError> {
    Err(PlanError::Parse(m.into()))
}

fn tokenize(src: &str) -> Result<Vec<Sexp>, PlanError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = src.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop().unwrap();
                match stack.last_mut() {
                    Some(top) => top.push(Sexp::List(done)),
                    None => return err("unbalanced ')'"),
                }
            }
            '"' => {
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(c) => s.push(c),
                        None => return err("unterminated string"),
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Str(s));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || matches!(n, '(' | ')' | '"' | ';') {
                        break;
                    }
                    s.push(n);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return err("unbalanced '('");
    }
    Ok(stack.pop().unwrap())
}

fn atom(s: &Sexp) -> Result<&str, PlanError> {
    match s {
        Sexp::Atom(a) => Ok(a),
        other => err(format!("expected a name, found {other:?}")),
    }
}

fn list(s: &Sexp) -> Result<&[Sexp], PlanError> {
    match s {
        Sexp::List(l) => Ok(l),
        other => err(format!("expected a list, found {other:?}")),
    }
}

fn names(s: &Sexp) -> Result<Vec<String>, PlanError> {
    list(s)?
        .iter()
        .map(|x| atom(x).map(str::to_owned))
        .collect()
}

fn literal(s: &Sexp) -> Result<Option<Scalar>, PlanError> {
    Ok(match s {
        Sexp::Str(v) => Some(Scalar::Str(v.clone())),
        Sexp::Atom(a) => {
            let numeric =
                a.starts_with(|c: char| c.is_ascii_digit()) || (a.len() > 1 && a.starts_with('-'));
            if !numeric {
                None
            } else if let Ok(i) = a.parse::<i64>() {
                Some(Scalar::Int(i))
            } else if let Ok(f) = a.parse::<f64>() {
                Some(Scalar::Float(f))
            } else {
                return err(format!("bad number {a}"));
            }
        }
        Sexp::List(l) => match l.as_slice() {
            [Sexp::Atom(d), Sexp::Str(v)] if d == "date" => Some(Scalar::Date(
                parse_date(v).ok_or_else(|| PlanError::Parse(format!("bad date {v}")))?,
            )),
            _ => None,
        },
    })
}

fn expr(s: &Sexp) -> Result<Expr, PlanError> {
    if let Some(v) = literal(s)? {
        return Ok(Expr::Lit(v));
    }
    let l = match s {
        Sexp::Atom(a) => return Ok(Expr::Col(a.clone())),
        Sexp::List(l) => l,
        Sexp::Str(_) => unreachable!(),
    };
    let (head, args) = match l.split_first() {
        Some((h, a)) => (atom(h)?, a),
        None => return err("empty expression"),
    };
    let arith = |op| -> Result<Expr, PlanError> {
        match args {
            [a, b] => Ok(Expr::arith(op, expr(a)?, expr(b)?)),
            _ => err(format!("{head} takes two operands")),
        }
    };
    let cmp = |op| -> Result<Expr, PlanError> {
        match args {
            [a, b] => Ok(Expr::cmp(op, expr(a)?, expr(b)?)),
            _ => err(format!("{head} takes two operands")),
        }
    };
    match head {
        "+" => arith(ArithOp::Add),
        "-" => arith(ArithOp::Sub),
        "*" => arith(ArithOp::Mul),
        "/" => arith(ArithOp::Div),
        "=" => cmp(CmpOp::Eq),
        "<>" => cmp(CmpOp::Ne),
        "<" => cmp(CmpOp::Lt),
        "<=" => cmp(CmpOp::Le),
        ">" => cmp(CmpOp::Gt),
        ">=" => cmp(CmpOp::Ge),
        "and" => Ok(Expr::And(args.iter().map(expr).collect::<Result<_, _>>()?)),
        "or" => Ok(Expr::Or(args.iter().map(expr).collect::<Result<_, _>>()?)),
        "not" => match args {
            [a] => Ok(Expr::Not(Box::new(expr(a)?))),
            _ => err("not takes one operand"),
        },
        "in" => match args.split_first() {
            Some((x, vals)) if !vals.is_empty() => Ok(Expr::InList(
                Box::new(expr(x)?),
                vals.iter()
                    .map(|v| {
                        literal(v)?.ok_or_else(|| PlanError::Parse("in-list takes literals".into()))
                    })
                    .collect::<Result<_, _>>()?,
            )),
            _ => err("in takes an expression and at least one literal"),
        },
        other => err(format!("unknown operator {other}")),
    }
}

fn agg_func(s: &str) -> Result<AggFunc, PlanError> {
    Ok(match s {
        "sum" => AggFunc::Sum,
        "count" => AggFunc::Count,
        "min" => AggFunc::Min,
        "max" => AggFunc::Max,
        "avg" => AggFunc::Avg,
        other => return err(format!("unknown aggregate {other}")),
    })
}

fn plan(s: &Sexp) -> Result<PlanNode, PlanError> {
    let l = list(s)?;
    let (head, args) = match l.split_first() {
        Some((h, a)) => (atom(h)?, a),
        None => return err("empty plan"),
    };
    let boxed = |s: &Sexp| plan(s).map(Box::new);
    Ok(match (head, args) {
        ("scan", [table, cols @ ..]) => PlanNode::Scan {
            table: atom(table)?.to_owned(),
            columns: cols
                .iter()
                .map(|c| atom(c).map(str::to_owned))
                .collect::<Result<_, _>>()?,
        },
        ("filter", [p, input]) => PlanNode::Filter {
            input: boxed(input)?,
            predicate: expr(p)?,
        },
        ("project", [exprs, input]) => PlanNode::Project {
            input: boxed(input)?,
            exprs: list(exprs)?
                .iter()
                .map(|e| match list(e)? {
                    [n, x] => Ok((atom(n)?.to_owned(), expr(x)?)),
                    _ => err("projection entries are (NAME EXPR)"),
                })
                .collect::<Result<_, _>>()?,
        },
        ("join", [pk, bk, probe, build]) => PlanNode::HashJoin {
            probe: boxed(probe)?,
            build: boxed(build)?,
            probe_keys: names(pk)?,
            build_keys: names(bk)?,
        },
        ("aggregate", [groups, aggs, input]) => PlanNode::HashAggregate {
            input: boxed(input)?,
            group_by: names(groups)?,
            aggregates: list(aggs)?
                .iter()
                .map(|a| match list(a)? {
                    [n, call] => {
                        let call = list(call)?;
                        let func =
                            agg_func(atom(call.first().ok_or_else(|| {
                                PlanError::Parse("empty aggregate call".into())
                            })?)?)?;
                        let arg = match &call[1..] {
                            [] => None,
                            [x] => Some(expr(x)?),
                            _ => return err("aggregates take at most one argument"),
                        };
                        Ok(Aggregate {
                            name: atom(n)?.to_owned(),
                            func,
                            arg,
                        })
                    }
                    _ => err("aggregate entries are (NAME (FUNC [EXPR]))"),
                })
                .collect::<Result<_, _>>()?,
        },
        ("order", [keys, input]) => PlanNode::OrderBy {
            input: boxed(input)?,
            keys: list(keys)?
                .iter()
                .map(|k| match list(k)? {
                    [c, dir] => Ok(SortKey {
                        column: atom(c)?.to_owned(),
                        descending: match atom(dir)? {
                            "asc" => false,
                            "desc" => true,
                            d => return err(format!("sort direction {d}")),
                        },
                    }),
                    _ => err("sort keys are (COL asc|desc)"),
                })
                .collect::<Result<_, _>>()?,
        },
        ("limit", [n, input]) => PlanNode::Limit {
            input: boxed(input)?,
            count: atom(n)?
                .parse()
                .map_err(|_| PlanError::Parse("limit takes a non-negative integer".into()))?,
        },
        (h, _) => return err(format!("malformed or unknown plan node {h}")),
    })
}

/// Parses a single plan.
pub fn parse_plan(src: &str) -> Result<PlanNode, PlanError> {
    match tokenize(src)?.as_slice() {
        [one] => plan(one),
        _ => err("expected exactly one plan"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryDef {
    pub name: String,
    pub category: String,
    pub plan: PlanNode,
}

/// Parses a query file.
pub fn parse_queries(src: &str) -> Result<Vec<QueryDef>, PlanError> {
    tokenize(src)?
        .iter()
        .map(|q| match list(q)? {
            [Sexp::Atom(k), name, category, p] if k == "query" => Ok(QueryDef {
                name: atom(name)?.to_owned(),
                category: atom(category)?.to_owned(),
                plan: plan(p)?,
            }),
            _ => err("expected (query NAME CATEGORY PLAN)"),
        })
        .collect()
}

fn write_lit(f: &mut fmt::Formatter<'_>, v: &Scalar) -> fmt::Result {
    match v {
        Scalar::Int(i) => write!(f, "{i}"),
        Scalar::Float(x) if x.fract() == 0.0 && x.is_finite() => write!(f, "{x:.1}"),
        Scalar::Float(x) => write!(f, "{x:?}"),
        Scalar::Date(d) => write!(f, "(date \"{}\")", format_date(*d)),
        Scalar::Str(s) => write!(f, "\"{s}\""),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joined = |f: &mut fmt::Formatter<'_>, head: &str, xs: &[Expr]| {
            write!(f, "({head}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            f.write_str(")")
        };
        match self {
            Expr::Col(c) => f.write_str(c),
            Expr::Lit(v) => write_lit(f, v),
            Expr::Arith(op, a, b) => {
                let s = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                };
                write!(f, "({s} {a} {b})")
            }
            Expr::Cmp(op, a, b) => {
                let s = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "<>",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, "({s} {a} {b})")
            }
            Expr::And(xs) => joined(f, "and", xs),
            Expr::Or(xs) => joined(f, "or", xs),
            Expr::Not(x) => write!(f, "(not {x})"),
            Expr::InList(x, vs) => {
                write!(f, "(in {x}")?;
                for v in vs {
                    f.write_str(" ")?;
                    write_lit(f, v)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanNode::Scan { table, columns } => write!(f, "(scan {table} {})", columns.join(" ")),
            PlanNode::Filter { input, predicate } => write!(f, "(filter {predicate} {input})"),
            PlanNode::Project { input, exprs } => {
                f.write_str("(project (")?;
                for (i, (n, e)) in exprs.iter().enumerate() {
                    write!(f, "{}({n} {e})", if i > 0 { " " } else { "" })?;
                }
                write!(f, ") {input})")
            }
            PlanNode::HashJoin {
                probe,
                build,
                probe_keys,
                build_keys,
            } => write!(
                f,
                "(join ({}) ({}) {probe} {build})",
                probe_keys.join(" "),
                build_keys.join(" ")
            ),
            PlanNode::HashAggregate {
                input,
                group_by,
                aggregates,
            } => {
                write!(f, "(aggregate ({}) (", group_by.join(" "))?;
                for (i, a) in aggregates.iter().enumerate() {
                    let sep = if i > 0 { " " } else { "" };
                    match &a.arg {
                        Some(e) => write!(f, "{sep}({} ({} {e}))", a.name, a.func)?,
                        None => write!(f, "{sep}({} ({}))", a.name, a.func)?,
                    }
                }
                write!(f, ") {input})")
            }
            PlanNode::OrderBy { input, keys } => {
                f.write_str("(order (")?;
                for (i, k) in keys.iter().enumerate() {
                    let dir = if k.descending { "desc" } else { "asc" };
                    write!(f, "{}({} {dir})", if i > 0 { " " } else { "" }, k.column)?;
                }
                write!(f, ") {input})")
            }
            PlanNode::Limit { input, count } => write!(f, "(limit {count} {input})"),
        }
    }
}

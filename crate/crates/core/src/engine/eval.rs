//! Vectorized expression evaluation over the active rows of a batch.

use super::plan::{ArithOp, CmpOp, Expr};
use crate::vector::{Batch, Field, Scalar, StrVec, Vector};

enum Operand {
    Vec(Vector),
    Const(Scalar),
}

fn operand(expr: &Expr, schema: &[Field], batch: &Batch, sel: &[u32]) -> Operand {
    match expr {
        Expr::Lit(s) => Operand::Const(s.clone()),
        _ => Operand::Vec(eval_value(expr, schema, batch, sel)),
    }
}

fn broadcast(s: &Scalar, n: usize) -> Vector {
    match s {
        Scalar::Int(v) => Vector::Int64(vec![*v; n]),
        Scalar::Float(v) => Vector::Float64(vec![*v; n]),
        Scalar::Date(v) => Vector::Date(vec![*v; n]),
        Scalar::Str(v) => Vector::Str(std::iter::repeat_n(v.as_str(), n).collect::<StrVec>()),
    }
}

fn column_index(schema: &[Field], name: &str) -> usize {
    schema
        .iter()
        .position(|f| f.name == name)
        .expect("plan validated against schema")
}

/// Evaluates a value expression; the result has one entry per `sel` row.
pub fn eval_value(expr: &Expr, schema: &[Field], batch: &Batch, sel: &[u32]) -> Vector {
    match expr {
        Expr::Col(c) => {
            let col = &batch.columns[column_index(schema, c)];
            if sel.len() == col.len() && sel.last().is_none_or(|&l| l as usize == sel.len() - 1) {
                col.clone()
            } else {
                col.gather(sel)
            }
        }
        Expr::Lit(s) => broadcast(s, sel.len()),
        Expr::Arith(op, a, b) => {
            let (a, b) = (
                operand(a, schema, batch, sel),
                operand(b, schema, batch, sel),
            );
            arith(*op, a, b, sel.len())
        }
        _ => panic!("predicate evaluated as a value"),
    }
}

fn as_f64s(o: &Operand, n: usize) -> Vec<f64> {
    match o {
        Operand::Vec(Vector::Float64(v)) => v.clone(),
        Operand::Vec(Vector::Int64(v)) => v.iter().map(|&x| x as f64).collect(),
        Operand::Const(s) => vec![s.as_f64().expect("numeric"); n],
        Operand::Vec(_) => panic!("non-numeric arithmetic operand"),
    }
}

fn arith(op: ArithOp, a: Operand, b: Operand, n: usize) -> Vector {
    let int_op = |x: i64, y: i64| match op {
        ArithOp::Add => x.wrapping_add(y),
        ArithOp::Sub => x.wrapping_sub(y),
        ArithOp::Mul => x.wrapping_mul(y),
        ArithOp::Div => unreachable!(),
    };
    let float_op = |x: f64, y: f64| match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => x / y,
    };
    if op != ArithOp::Div {
        match (&a, &b) {
            (Operand::Vec(Vector::Int64(x)), Operand::Vec(Vector::Int64(y))) => {
                return Vector::Int64(x.iter().zip(y).map(|(&x, &y)| int_op(x, y)).collect())
            }
            (Operand::Vec(Vector::Int64(x)), Operand::Const(Scalar::Int(y))) => {
                return Vector::Int64(x.iter().map(|&x| int_op(x, *y)).collect())
            }
            (Operand::Const(Scalar::Int(x)), Operand::Vec(Vector::Int64(y))) => {
                return Vector::Int64(y.iter().map(|&y| int_op(*x, y)).collect())
            }
            (Operand::Const(Scalar::Int(x)), Operand::Const(Scalar::Int(y))) => {
                return Vector::Int64(vec![int_op(*x, *y); n])
            }
            _ => {}
        }
    }
    match (&a, &b) {
        (Operand::Vec(Vector::Float64(x)), Operand::Const(Scalar::Float(y))) => {
            Vector::Float64(x.iter().map(|&x| float_op(x, *y)).collect())
        }
        (Operand::Const(Scalar::Float(x)), Operand::Vec(Vector::Float64(y))) => {
            Vector::Float64(y.iter().map(|&y| float_op(*x, y)).collect())
        }
        (Operand::Vec(Vector::Float64(x)), Operand::Vec(Vector::Float64(y))) => {
            Vector::Float64(x.iter().zip(y).map(|(&x, &y)| float_op(x, y)).collect())
        }
        _ => {
            let (x, y) = (as_f64s(&a, n), as_f64s(&b, n));
            Vector::Float64(x.iter().zip(&y).map(|(&x, &y)| float_op(x, y)).collect())
        }
    }
}

/// Returns the subset of `sel` for which the predicate holds, in order.
pub fn eval_predicate(expr: &Expr, schema: &[Field], batch: &Batch, sel: &[u32]) -> Vec<u32> {
    match expr {
        Expr::Cmp(op, a, b) => {
            let (a, b) = (
                operand(a, schema, batch, sel),
                operand(b, schema, batch, sel),
            );
            let mask = compare(*op, &a, &b, sel.len());
            sel.iter()
                .zip(mask)
                .filter(|(_, m)| *m)
                .map(|(&r, _)| r)
                .collect()
        }
        Expr::And(xs) => {
            let mut cur = sel.to_vec();
            for x in xs {
                if cur.is_empty() {
                    break;
                }
                cur = eval_predicate(x, schema, batch, &cur);
            }
            cur
        }
        Expr::Or(xs) => {
            let mut matched = vec![false; sel.len()];
            let mut remaining: Vec<u32> = sel.to_vec();
            for x in xs {
                if remaining.is_empty() {
                    break;
                }
                let hit = eval_predicate(x, schema, batch, &remaining);
                let mut h = hit.iter().peekable();
                remaining.retain(|r| {
                    if h.peek() == Some(&r) {
                        h.next();
                        false
                    } else {
                        true
                    }
                });
                mark(&mut matched, sel, &hit);
            }
            sel.iter()
                .zip(matched)
                .filter(|(_, m)| *m)
                .map(|(&r, _)| r)
                .collect()
        }
        Expr::Not(x) => {
            let hit = eval_predicate(x, schema, batch, sel);
            let mut h = hit.iter().peekable();
            sel.iter()
                .copied()
                .filter(|r| {
                    if h.peek() == Some(&r) {
                        h.next();
                        false
                    } else {
                        true
                    }
                })
                .collect()
        }
        Expr::InList(x, values) => {
            let v = Operand::Vec(eval_value(x, schema, batch, sel));
            let mut mask = vec![false; sel.len()];
            for val in values {
                let m = compare(CmpOp::Eq, &v, &Operand::Const(val.clone()), sel.len());
                for (a, b) in mask.iter_mut().zip(m) {
                    *a |= b;
                }
            }
            sel.iter()
                .zip(mask)
                .filter(|(_, m)| *m)
                .map(|(&r, _)| r)
                .collect()
        }
        _ => panic!("value evaluated as a predicate"),
    }
}

/// Sets `matched[i]` for each `sel[i]` that appears in the sorted `hit`.
fn mark(matched: &mut [bool], sel: &[u32], hit: &[u32]) {
    let mut j = 0;
    for (i, r) in sel.iter().enumerate() {
        while j < hit.len() && hit[j] < *r {
            j += 1;
        }
        if j < hit.len() && hit[j] == *r {
            matched[i] = true;
        }
    }
}

fn compare(op: CmpOp, a: &Operand, b: &Operand, n: usize) -> Vec<bool> {
    use Operand::{Const as C, Vec as V};
    match (a, b) {
        (V(Vector::Int64(x)), C(Scalar::Int(y))) => x.iter().map(|v| op.holds(v.cmp(y))).collect(),
        (V(Vector::Float64(x)), C(Scalar::Float(y))) => {
            x.iter().map(|v| op.holds(v.total_cmp(y))).collect()
        }
        (V(Vector::Date(x)), C(Scalar::Date(y))) => x.iter().map(|v| op.holds(v.cmp(y))).collect(),
        (V(Vector::Str(x)), C(Scalar::Str(y))) => {
            let y = y.as_bytes();
            (0..x.len())
                .map(|i| op.holds(x.get_bytes(i).cmp(y)))
                .collect()
        }
        (V(Vector::Int64(x)), V(Vector::Int64(y))) => {
            x.iter().zip(y).map(|(a, b)| op.holds(a.cmp(b))).collect()
        }
        (V(Vector::Date(x)), V(Vector::Date(y))) => {
            x.iter().zip(y).map(|(a, b)| op.holds(a.cmp(b))).collect()
        }
        (V(Vector::Float64(x)), V(Vector::Float64(y))) => x
            .iter()
            .zip(y)
            .map(|(a, b)| op.holds(a.total_cmp(b)))
            .collect(),
        (V(Vector::Str(x)), V(Vector::Str(y))) => (0..x.len())
            .map(|i| op.holds(x.get_bytes(i).cmp(y.get_bytes(i))))
            .collect(),
        (C(_), V(_)) => compare(flip(op), b, a, n),
        (C(x), C(y)) => vec![op.holds(x.total_cmp(y)); n],
        _ => {
            let (x, y) = (as_f64s(a, n), as_f64s(b, n));
            x.iter()
                .zip(&y)
                .map(|(a, b)| op.holds(a.total_cmp(b)))
                .collect()
        }
    }
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        o => o,
    }
}

//! TPC-H-like tables at desk scale.
//!
//! Row counts per unit of scale: lineitem 60000, orders 15000, customer 1500,
//! part 2000. Every order has one to seven lines and the lines of all orders
//! add up to exactly four per order.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vector::{date_from_ymd, Field, LogicalType, StrVec, Table, Vector};

pub const LINEITEM_PER_SCALE: usize = 60_000;
pub const ORDERS_PER_SCALE: usize = 15_000;
pub const CUSTOMER_PER_SCALE: usize = 1_500;
pub const PART_PER_SCALE: usize = 2_000;

pub const SHIP_MODES: [&str; 7] = ["AIR", "REG AIR", "RAIL", "SHIP", "TRUCK", "MAIL", "FOB"];
pub const SHIP_INSTRUCT: [&str; 4] = [
    "DELIVER IN PERSON",
    "COLLECT COD",
    "NONE",
    "TAKE BACK RETURN",
];
pub const SEGMENTS: [&str; 5] = [
    "AUTOMOBILE",
    "BUILDING",
    "FURNITURE",
    "MACHINERY",
    "HOUSEHOLD",
];
pub const PRIORITIES: [&str; 5] = ["1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"];
pub const CONTAINERS: [&str; 8] = [
    "SM CASE", "SM BOX", "SM PACK", "MED BAG", "MED BOX", "MED PACK", "LG CASE", "LG BOX",
];

fn s(w: u8) -> LogicalType {
    LogicalType::FixedString(w)
}

pub fn lineitem_schema() -> Vec<Field> {
    use LogicalType::*;
    vec![
        Field::new("l_orderkey", Int64),
        Field::new("l_partkey", Int64),
        Field::new("l_suppkey", Int64),
        Field::new("l_linenumber", Int64),
        Field::new("l_quantity", Int64),
        Field::new("l_extendedprice", Float64),
        Field::new("l_discount", Float64),
        Field::new("l_tax", Float64),
        Field::new("l_returnflag", s(1)),
        Field::new("l_linestatus", s(1)),
        Field::new("l_shipdate", Date),
        Field::new("l_shipinstruct", s(25)),
        Field::new("l_shipmode", s(10)),
    ]
}

pub fn orders_schema() -> Vec<Field> {
    use LogicalType::*;
    vec![
        Field::new("o_orderkey", Int64),
        Field::new("o_custkey", Int64),
        Field::new("o_orderstatus", s(1)),
        Field::new("o_totalprice", Float64),
        Field::new("o_orderdate", Date),
        Field::new("o_orderpriority", s(15)),
    ]
}

pub fn customer_schema() -> Vec<Field> {
    use LogicalType::*;
    vec![
        Field::new("c_custkey", Int64),
        Field::new("c_nationkey", Int64),
        Field::new("c_mktsegment", s(10)),
        Field::new("c_acctbal", Float64),
    ]
}

pub fn part_schema() -> Vec<Field> {
    use LogicalType::*;
    vec![
        Field::new("p_partkey", Int64),
        Field::new("p_brand", s(10)),
        Field::new("p_container", s(10)),
        Field::new("p_size", Int64),
        Field::new("p_retailprice", Float64),
    ]
}

/// Sparse order keys in the style of TPC-H: 8 used out of every 32.
pub fn order_key(i: usize) -> i64 {
    ((i / 8) * 32 + i % 8 + 1) as i64
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn strs<'a>(it: impl Iterator<Item = &'a str>) -> Vector {
    Vector::Str(it.collect::<StrVec>())
}

/// Generates the four tables. Same `scale` and `seed` give identical tables.
pub fn generate_data(scale: u32, seed: u64) -> BTreeMap<String, Table> {
    assert!(scale >= 1, "scale must be at least 1");
    let scale = scale as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_orders, n_cust, n_part) = (
        ORDERS_PER_SCALE * scale,
        CUSTOMER_PER_SCALE * scale,
        PART_PER_SCALE * scale,
    );

    let part_price: Vec<f64> = (0..n_part)
        .map(|p| cents(900.0 + ((p + 1) % 20_001) as f64 / 10.0 + (p % 1000) as f64))
        .collect();
    let part = Table::new(
        part_schema(),
        vec![
            Vector::Int64((1..=n_part as i64).collect()),
            strs((0..n_part).map(|_| *BRANDS.choose(&mut rng).unwrap())),
            strs((0..n_part).map(|_| *CONTAINERS.choose(&mut rng).unwrap())),
            Vector::Int64((0..n_part).map(|_| rng.gen_range(1..=50)).collect()),
            Vector::Float64(part_price.clone()),
        ],
    );

    let customer = Table::new(
        customer_schema(),
        vec![
            Vector::Int64((1..=n_cust as i64).collect()),
            Vector::Int64((0..n_cust).map(|_| rng.gen_range(0..25)).collect()),
            strs((0..n_cust).map(|_| *SEGMENTS.choose(&mut rng).unwrap())),
            Vector::Float64(
                (0..n_cust)
                    .map(|_| cents(rng.gen_range(-999.99..9999.99)))
                    .collect(),
            ),
        ],
    );

    // Lines per order: start at one each, then hand out the remaining
    // 3 * n_orders lines at random, never exceeding seven.
    let mut lines = vec![1u8; n_orders];
    let mut left = 3 * n_orders;
    while left > 0 {
        let o = rng.gen_range(0..n_orders);
        if lines[o] < 7 {
            lines[o] += 1;
            left -= 1;
        }
    }

    let start = date_from_ymd(1992, 1, 1);
    let end = date_from_ymd(1998, 8, 2);
    let cutoff = date_from_ymd(1995, 6, 17);
    let n_line = LINEITEM_PER_SCALE * scale;
    let mut l = LineCols::with_capacity(n_line);
    let mut o_cust = Vec::with_capacity(n_orders);
    let mut o_status = StrVec::with_capacity(n_orders, n_orders);
    let mut o_total = Vec::with_capacity(n_orders);
    let mut o_date = Vec::with_capacity(n_orders);
    let mut o_prio = StrVec::with_capacity(n_orders, n_orders * 8);
    for (i, &count) in lines.iter().enumerate() {
        let okey = order_key(i);
        let odate = rng.gen_range(start..=end - 151);
        let mut total = 0.0;
        let mut open = 0;
        for ln in 1..=count as i64 {
            let pk = rng.gen_range(1..=n_part as i64);
            let qty = rng.gen_range(1..=50i64);
            let price = cents(qty as f64 * part_price[pk as usize - 1]);
            let disc = rng.gen_range(0..=10) as f64 / 100.0;
            let tax = rng.gen_range(0..=8) as f64 / 100.0;
            let ship = odate + rng.gen_range(1..=121);
            let receipt = ship + rng.gen_range(1..=30);
            let flag = if receipt <= cutoff {
                if rng.gen_bool(0.5) {
                    "R"
                } else {
                    "A"
                }
            } else {
                "N"
            };
            let status = if ship > cutoff { "O" } else { "F" };
            open += (status == "O") as usize;
            total += price * (1.0 + tax) * (1.0 - disc);
            l.orderkey.push(okey);
            l.partkey.push(pk);
            l.suppkey.push(rng.gen_range(1..=(100 * scale) as i64));
            l.linenumber.push(ln);
            l.quantity.push(qty);
            l.price.push(price);
            l.discount.push(disc);
            l.tax.push(tax);
            l.flag.push(flag);
            l.status.push(status);
            l.shipdate.push(ship);
            l.instruct.push(SHIP_INSTRUCT.choose(&mut rng).unwrap());
            l.mode.push(SHIP_MODES.choose(&mut rng).unwrap());
        }
        o_cust.push(rng.gen_range(1..=n_cust as i64));
        o_status.push(match open {
            0 => "F",
            n if n == count as usize => "O",
            _ => "P",
        });
        o_total.push(cents(total));
        o_date.push(odate);
        o_prio.push(PRIORITIES.choose(&mut rng).unwrap());
    }

    let orders = Table::new(
        orders_schema(),
        vec![
            Vector::Int64((0..n_orders).map(order_key).collect()),
            Vector::Int64(o_cust),
            Vector::Str(o_status),
            Vector::Float64(o_total),
            Vector::Date(o_date),
            Vector::Str(o_prio),
        ],
    );
    let lineitem = Table::new(lineitem_schema(), l.into_columns());

    BTreeMap::from([
        ("customer".to_owned(), customer),
        ("lineitem".to_owned(), lineitem),
        ("orders".to_owned(), orders),
        ("part".to_owned(), part),
    ])
}

const BRANDS: [&str; 25] = [
    "Brand#11", "Brand#12", "Brand#13", "Brand#14", "Brand#15", "Brand#21", "Brand#22", "Brand#23",
    "Brand#24", "Brand#25", "Brand#31", "Brand#32", "Brand#33", "Brand#34", "Brand#35", "Brand#41",
    "Brand#42", "Brand#43", "Brand#44", "Brand#45", "Brand#51", "Brand#52", "Brand#53", "Brand#54",
    "Brand#55",
];

struct LineCols {
    orderkey: Vec<i64>,
    partkey: Vec<i64>,
    suppkey: Vec<i64>,
    linenumber: Vec<i64>,
    quantity: Vec<i64>,
    price: Vec<f64>,
    discount: Vec<f64>,
    tax: Vec<f64>,
    flag: StrVec,
    status: StrVec,
    shipdate: Vec<i32>,
    instruct: StrVec,
    mode: StrVec,
}

impl LineCols {
    fn with_capacity(n: usize) -> Self {
        Self {
            orderkey: Vec::with_capacity(n),
            partkey: Vec::with_capacity(n),
            suppkey: Vec::with_capacity(n),
            linenumber: Vec::with_capacity(n),
            quantity: Vec::with_capacity(n),
            price: Vec::with_capacity(n),
            discount: Vec::with_capacity(n),
            tax: Vec::with_capacity(n),
            flag: StrVec::with_capacity(n, n),
            status: StrVec::with_capacity(n, n),
            shipdate: Vec::with_capacity(n),
            instruct: StrVec::with_capacity(n, n * 12),
            mode: StrVec::with_capacity(n, n * 5),
        }
    }

    fn into_columns(self) -> Vec<Vector> {
        vec![
            Vector::Int64(self.orderkey),
            Vector::Int64(self.partkey),
            Vector::Int64(self.suppkey),
            Vector::Int64(self.linenumber),
            Vector::Int64(self.quantity),
            Vector::Float64(self.price),
            Vector::Float64(self.discount),
            Vector::Float64(self.tax),
            Vector::Str(self.flag),
            Vector::Str(self.status),
            Vector::Date(self.shipdate),
            Vector::Str(self.instruct),
            Vector::Str(self.mode),
        ]
    }
}

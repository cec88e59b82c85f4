//! Text event log: one event per line, `kind region offset length cost`.
//! `region` is `-` for boundary calls.

use std::io::{self, Write};

use super::{AccessKind, BoundaryKind, RegionId, SimConfig, SimError, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Alloc,
    Free,
    Touch(AccessKind),
    Boundary(BoundaryKind),
}

impl EventKind {
    fn name(self) -> &'static str {
        match self {
            EventKind::Alloc => "alloc",
            EventKind::Free => "free",
            EventKind::Touch(k) => k.name(),
            EventKind::Boundary(BoundaryKind::ECall) => "ecall",
            EventKind::Boundary(BoundaryKind::OCall) => "ocall",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "alloc" => EventKind::Alloc,
            "free" => EventKind::Free,
            "seq_read" => EventKind::Touch(AccessKind::SequentialRead),
            "seq_write" => EventKind::Touch(AccessKind::SequentialWrite),
            "rand_read" => EventKind::Touch(AccessKind::RandomRead),
            "rand_write" => EventKind::Touch(AccessKind::RandomWrite),
            "ecall" => EventKind::Boundary(BoundaryKind::ECall),
            "ocall" => EventKind::Boundary(BoundaryKind::OCall),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub region: Option<RegionId>,
    pub offset: u64,
    /// Allocation size, touched length or boundary bytes.
    pub length: u64,
    pub cost: f64,
}

pub fn write_log(events: &[Event], mut w: impl Write) -> io::Result<()> {
    for e in events {
        let region = e.region.map_or("-".to_owned(), |r| r.to_string());
        writeln!(
            w,
            "{} {} {} {} {}",
            e.kind.name(),
            region,
            e.offset,
            e.length,
            e.cost
        )?;
    }
    Ok(())
}

pub fn parse_log(text: &str) -> Result<Vec<Event>, SimError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = || SimError::Log(format!("line {}: cannot parse {line:?}", n + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err());
        }
        let kind = EventKind::parse(f[0]).ok_or_else(err)?;
        let region = match f[1] {
            "-" => None,
            r => Some(RegionId(r.parse().map_err(|_| err())?)),
        };
        out.push(Event {
            kind,
            region,
            offset: f[2].parse().map_err(|_| err())?,
            length: f[3].parse().map_err(|_| err())?,
            cost: f[4].parse().map_err(|_| err())?,
        });
    }
    Ok(out)
}

/// Re-executes a log against a fresh state, checking every charge matches.
pub fn replay(config: SimConfig, events: &[Event]) -> Result<SimState, SimError> {
    let mut s = SimState::new(config)?;
    for (i, e) in events.iter().enumerate() {
        let region = || {
            e.region
                .ok_or_else(|| SimError::Log(format!("event {i} lacks a region")))
        };
        let cost = match e.kind {
            EventKind::Alloc => {
                let (id, cost) = s.alloc_charged(e.length)?;
                if Some(id) != e.region {
                    return Err(SimError::Log(format!(
                        "event {i}: allocation returned region {id}"
                    )));
                }
                cost
            }
            EventKind::Free => s.free(region()?)?,
            EventKind::Touch(k) => s.touch(region()?, e.offset, e.length, k)?,
            EventKind::Boundary(k) => s.charge_boundary(k, e.length),
        };
        if cost != e.cost {
            return Err(SimError::Log(format!(
                "event {i}: replay charged {cost}, log says {}",
                e.cost
            )));
        }
    }
    Ok(s)
}

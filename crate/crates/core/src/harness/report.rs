use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::QueryRecord;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Record {
    Ok(QueryRecord),
    Skipped {
        config: String,
        query: String,
        reason: String,
    },
}

impl Record {
    pub fn config(&self) -> &str {
        match self {
            Record::Ok(r) => &r.config,
            Record::Skipped { config, .. } => config,
        }
    }

    pub fn query(&self) -> &str {
        match self {
            Record::Ok(r) => &r.query,
            Record::Skipped { query, .. } => query,
        }
    }

    pub fn result(&self) -> Option<&QueryRecord> {
        match self {
            Record::Ok(r) => Some(r),
            Record::Skipped { .. } => None,
        }
    }
}

/// Geometric mean of per-query times. Lower is better.
pub fn power_score(times: &[f64]) -> Result<f64, HarnessError> {
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(HarnessError::NonPositiveTime);
    }
    let log_sum: f64 = times.iter().map(|t| t.ln()).sum();
    Ok((log_sum / times.len() as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub config: String,
    /// Absent when any query of the config was skipped.
    pub power_wall_s: Option<f64>,
    pub power_cost: Option<f64>,
    /// Power scores divided by the baseline's.
    pub ratio_wall: Option<f64>,
    pub ratio_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeScore {
    pub config: String,
    pub query: String,
    pub wall: f64,
    pub cost: f64,
}

/// A modeled-cost ratio compared with its target range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCheck {
    pub name: String,
    pub observed: f64,
    pub low: f64,
    /// `None` means unbounded above.
    pub high: Option<f64>,
    pub pass: bool,
}

pub const CALIBRATION_LABEL: &str = "model-calibration checks, not hardware reproduction";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub baseline: String,
    pub configs: Vec<String>,
    pub records: Vec<Record>,
    /// On-disk size of the Lightweight files over the Uncompressed ones.
    pub codec_ratio: Option<f64>,
    pub scores: Vec<ConfigScore>,
    pub relative: Vec<RelativeScore>,
    pub calibration_label: String,
    pub calibration: Vec<CalibrationCheck>,
}

impl SweepReport {
    /// Derives every score from the raw records. Pure: the same records
    /// always give the same report.
    pub fn derive(
        baseline: &str,
        configs: &[String],
        records: Vec<Record>,
    ) -> Result<Self, HarnessError> {
        let mut by_config: BTreeMap<&str, Vec<&Record>> = BTreeMap::new();
        for r in &records {
            by_config.entry(r.config()).or_default().push(r);
        }
        let base: BTreeMap<&str, &QueryRecord> = by_config
            .get(baseline)
            .ok_or_else(|| HarnessError::Baseline(baseline.to_owned()))?
            .iter()
            .map(|r| r.result().map(|q| (q.query.as_str(), q)))
            .collect::<Option<_>>()
            .ok_or_else(|| HarnessError::Baseline(baseline.to_owned()))?;

        let mut scores = Vec::with_capacity(configs.len());
        let mut relative = Vec::new();
        let power =
            |rs: &[&Record], f: fn(&QueryRecord) -> f64| -> Result<Option<f64>, HarnessError> {
                let v: Option<Vec<f64>> = rs.iter().map(|r| r.result().map(f)).collect();
                v.map(|v| power_score(&v)).transpose()
            };
        let base_rs = &by_config[baseline];
        let (bw, bc) = (
            power(base_rs, |q| q.mean_s)?,
            power(base_rs, |q| q.modeled_cost)?,
        );
        for c in configs {
            let rs = by_config
                .get(c.as_str())
                .map(Vec::as_slice)
                .unwrap_or_default();
            let (w, cost) = (power(rs, |q| q.mean_s)?, power(rs, |q| q.modeled_cost)?);
            scores.push(ConfigScore {
                config: c.clone(),
                power_wall_s: w,
                power_cost: cost,
                ratio_wall: w.zip(bw).map(|(a, b)| a / b),
                ratio_cost: cost.zip(bc).map(|(a, b)| a / b),
            });
            for q in rs.iter().filter_map(|r| r.result()) {
                if let Some(b) = base.get(q.query.as_str()) {
                    relative.push(RelativeScore {
                        config: c.clone(),
                        query: q.query.clone(),
                        wall: q.mean_s / b.mean_s,
                        cost: q.modeled_cost / b.modeled_cost,
                    });
                }
            }
        }
        let mut report = Self {
            baseline: baseline.to_owned(),
            configs: configs.to_vec(),
            records,
            codec_ratio: None,
            scores,
            relative,
            calibration_label: CALIBRATION_LABEL.to_owned(),
            calibration: Vec::new(),
        };
        report.calibration = report.calibration_checks();
        Ok(report)
    }

    pub fn score(&self, config: &str) -> Option<&ConfigScore> {
        self.scores.iter().find(|s| s.config == config)
    }

    /// Power-score ratio of two configs in modeled cost.
    pub fn cost_ratio(&self, num: &str, den: &str) -> Option<f64> {
        let a = self.score(num)?.power_cost?;
        let b = self.score(den)?.power_cost?;
        Some(a / b)
    }

    pub fn relative_cost(&self, config: &str, query: &str) -> Option<f64> {
        self.relative
            .iter()
            .find(|r| r.config == config && r.query == query)
            .map(|r| r.cost)
    }

    /// Checks that apply when the report contains the colour matrix; empty
    /// otherwise.
    pub fn calibration_checks(&self) -> Vec<CalibrationCheck> {
        let mut out = Vec::new();
        let mut check = |name: &str, observed: Option<f64>, low: f64, high: Option<f64>| {
            if let Some(observed) = observed {
                out.push(CalibrationCheck {
                    name: name.to_owned(),
                    observed,
                    low,
                    high,
                    pass: observed >= low && high.is_none_or(|h| observed <= h),
                });
            }
        };
        let tol = |target: f64| (target * 0.75, target * 1.25);
        let (lo, hi) = tol(3.0);
        check(
            "software AES, uncompressed / light-blue",
            self.cost_ratio("light-green", "light-blue"),
            lo,
            Some(hi),
        );
        let (lo, hi) = tol(2.0);
        check(
            "software AES, compressed / light-blue",
            self.cost_ratio("green", "light-blue"),
            lo,
            Some(hi),
        );
        let (lo, hi) = tol(1.5);
        check(
            "enclave tax, light-purple / red",
            self.cost_ratio("light-purple", "red"),
            lo,
            Some(hi),
        );
        check(
            "best enclave config / light-blue",
            self.cost_ratio("light-purple", "light-blue"),
            1.0 + f64::EPSILON,
            Some(2.0),
        );
        for bad in ["light-orange", "yellow", "orange"] {
            check(
                &format!("{bad} / light-blue"),
                self.cost_ratio(bad, "light-blue"),
                5.0 * 0.75,
                None,
            );
        }
        let worst = self
            .relative
            .iter()
            .filter(|r| ["light-orange", "yellow", "orange"].contains(&r.config.as_str()))
            .map(|r| r.cost)
            .reduce(f64::max);
        check(
            "worst query, pathological configs",
            worst,
            10.0 * 0.75,
            Some(10f64.powf(1.5)),
        );
        out
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rebuilds a report from JSON, re-deriving every score from the raw
    /// records.
    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        let raw: SweepReport = serde_json::from_str(s)?;
        let mut r = Self::derive(&raw.baseline, &raw.configs, raw.records)?;
        r.codec_ratio = raw.codec_ratio;
        Ok(r)
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            let rel = self
                .relative
                .iter()
                .find(|x| x.config == r.config() && x.query == r.query());
            let row = match r {
                Record::Ok(q) => {
                    let sim = q.sim.unwrap_or_default();
                    CsvRow {
                        config: &q.config,
                        query: &q.query,
                        status: "ok",
                        mean_s: Some(q.mean_s),
                        modeled_cost: Some(q.modeled_cost),
                        relative_wall: rel.map(|x| x.wall),
                        relative_cost: rel.map(|x| x.cost),
                        rows_processed: Some(q.rows_processed),
                        bytes_read: Some(q.bytes_read),
                        bytes_decrypted: Some(q.bytes_decrypted),
                        bytes_decompressed: Some(q.bytes_decompressed),
                        epc_loads: q.sim.map(|_| sim.epc_loads),
                        epc_evictions: q.sim.map(|_| sim.epc_evictions),
                        pages_zeroed: q.sim.map(|_| sim.pages_zeroed),
                        ecalls: q.sim.map(|_| sim.ecalls),
                        ocalls: q.sim.map(|_| sim.ocalls),
                        reason: "",
                    }
                }
                Record::Skipped {
                    config,
                    query,
                    reason,
                } => CsvRow {
                    config,
                    query,
                    status: "skipped",
                    reason,
                    ..CsvRow::default()
                },
            };
            w.serialize(row)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "baseline: {}", self.baseline);
        if let Some(r) = self.codec_ratio {
            let _ = writeln!(s, "lightweight codec size ratio: {r:.3}");
        }
        let _ = writeln!(
            s,
            "\n{:<14} {:>12} {:>8} {:>14} {:>8}",
            "config", "power wall", "ratio", "power cost", "ratio"
        );
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_owned(), |v| format!("{v:.p$}"));
        for c in &self.scores {
            let _ = writeln!(
                s,
                "{:<14} {:>12} {:>8} {:>14} {:>8}",
                c.config,
                opt(c.power_wall_s, 5),
                opt(c.ratio_wall, 2),
                opt(c.power_cost, 0),
                opt(c.ratio_cost, 2)
            );
        }
        let queries: Vec<&str> = {
            let mut q: Vec<&str> = self.relative.iter().map(|r| r.query.as_str()).collect();
            q.sort_unstable();
            q.dedup();
            q
        };
        let _ = write!(s, "\nrelative modeled cost\n{:<14}", "config");
        for q in &queries {
            let _ = write!(s, " {q:>7}");
        }
        for c in &self.configs {
            let _ = write!(s, "\n{c:<14}");
            for q in &queries {
                let _ = write!(s, " {:>7}", opt(self.relative_cost(c, q), 2));
            }
        }
        s.push('\n');
        let skipped: Vec<&Record> = self
            .records
            .iter()
            .filter(|r| r.result().is_none())
            .collect();
        if !skipped.is_empty() {
            s.push_str("\nskipped\n");
            for r in skipped {
                if let Record::Skipped {
                    config,
                    query,
                    reason,
                } = r
                {
                    let _ = writeln!(s, "{config} {query}: {reason}");
                }
            }
        }
        if !self.calibration.is_empty() {
            let _ = writeln!(s, "\n{}", self.calibration_label);
            for c in &self.calibration {
                let _ = writeln!(
                    s,
                    "[{}] {}: {:.2} (range {:.2}..{})",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.observed,
                    c.low,
                    c.high.map_or("inf".to_owned(), |h| format!("{h:.2}"))
                );
            }
        }
        s
    }

    /// Writes `report.json`, `report.csv` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("report.csv"), self.to_csv()?)?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

#[derive(Default, Serialize)]
struct CsvRow<'a> {
    config: &'a str,
    query: &'a str,
    status: &'a str,
    mean_s: Option<f64>,
    modeled_cost: Option<f64>,
    relative_wall: Option<f64>,
    relative_cost: Option<f64>,
    rows_processed: Option<u64>,
    bytes_read: Option<u64>,
    bytes_decrypted: Option<u64>,
    bytes_decompressed: Option<u64>,
    epc_loads: Option<u64>,
    epc_evictions: Option<u64>,
    pages_zeroed: Option<u64>,
    ecalls: Option<u64>,
    ocalls: Option<u64>,
    reason: &'a str,
}

//! Result rows, their CSV form and per-point aggregates.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use simstack_ddpg::train::TraceRow;

use crate::{HarnessError, Result};

pub const RESULTS_HEADER: [&str; 10] = [
    "scheme",
    "seed",
    "N",
    "L",
    "M",
    "P_dbm",
    "sum_rate",
    "wall_time",
    "config_hash",
    "assumptions",
];

pub const TRACE_HEADER: [&str; 5] = ["step", "episode", "reward", "variance", "lr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub scheme: String,
    pub seed: u64,
    #[serde(rename = "N")]
    pub atoms: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "M")]
    pub users: usize,
    #[serde(rename = "P_dbm")]
    pub power_dbm: f64,
    /// NaN when the run failed; the reason is in `assumptions`.
    pub sum_rate: f64,
    pub wall_time: f64,
    pub config_hash: String,
    /// `;`-separated `key=value` tags.
    pub assumptions: String,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        !self.sum_rate.is_finite()
    }
}

pub fn write_results(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results file, rejecting any header other than the documented one.
pub fn read_results(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<&str> = r.headers()?.iter().collect();
    if header != RESULTS_HEADER {
        return Err(HarnessError::Schema(format!(
            "expected header {}, found {}",
            RESULTS_HEADER.join(","),
            header.join(",")
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for t in trace {
        w.write_record([
            t.step.to_string(),
            t.episode.to_string(),
            t.reward.to_string(),
            t.variance.to_string(),
            t.lr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample mean and standard error (`s / √n`, with `n − 1` in `s`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `mean(a) − mean(b)` and the pooled standard error `√(se_a² + se_b²)`.
pub fn separation(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, sa) = mean_stderr(a);
    let (mb, sb) = mean_stderr(b);
    (ma - mb, sa.hypot(sb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub scheme: String,
    #[serde(rename = "N")]
    pub atoms: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "M")]
    pub users: usize,
    #[serde(rename = "P_dbm")]
    pub power_dbm: f64,
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: Vec<SummaryPoint>,
}

/// Groups successful records by (scheme, N, L, M, P) in first-seen order.
pub fn summarize(records: &[ExperimentRecord]) -> Summary {
    let mut order: Vec<(String, usize, usize, usize, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, usize, usize, usize, u64), (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let key = (r.scheme.clone(), r.atoms, r.layers, r.users, r.power_dbm.to_bits());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), 0)
        });
        if r.failed() {
            entry.1 += 1;
        } else {
            entry.0.push(r.sum_rate);
        }
    }
    let points = order
        .into_iter()
        .map(|key| {
            let (values, failures) = &groups[&key];
            let (mean, stderr) = mean_stderr(values);
            SummaryPoint {
                scheme: key.0,
                atoms: key.1,
                layers: key.2,
                users: key.3,
                power_dbm: f64::from_bits(key.4),
                count: values.len(),
                failures: *failures,
                mean,
                stderr,
            }
        })
        .collect();
    Summary { points }
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

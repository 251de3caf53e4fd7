//! On-disk artifacts: CSV tables, the JSON summary and raw field dumps.

use std::fs;
use std::io::Write;
use std::path::Path;

use jkolab_core::ab::{ABReport, ABSequence};
use jkolab_core::entropy::GridDensity;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Bumped whenever a field of [`Summary`] changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Distance to the threshold, positive when passing.
    pub margin: f64,
    /// Tolerance budget consumed by the check, if any.
    pub slack: Option<f64>,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, pass: bool, margin: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, margin, slack: None, detail: detail.into() }
    }

    /// Passes when `value <= limit`.
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value <= limit, limit - value, format!("{value:.3e} <= {limit:.3e}"))
    }

    /// Passes when `value >= limit`.
    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value >= limit, value - limit, format!("{value:.6e} >= {limit:.6e}"))
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = Some(slack);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub config: Option<RunConfig>,
    pub error: Option<String>,
}

impl Summary {
    pub fn new(command: &str, checks: Vec<CheckResult>, config: Option<RunConfig>, error: Option<String>) -> Self {
        let passed = error.is_none() && checks.iter().all(|c| c.pass);
        Self { schema_version: SCHEMA_VERSION, command: command.into(), passed, checks, config, error }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(dir.join("summary.json"), text + "\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub k: usize,
    pub t: f64,
    pub entropy: f64,
    pub w2_step: f64,
    pub residual: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub iterations: usize,
    pub objective: f64,
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()
}

#[derive(Serialize)]
struct AbCsvRow {
    k: usize,
    t: f64,
    one_minus_x: f64,
    min_det: f64,
    ma_ok: bool,
    slack: f64,
    lap_u_margin: f64,
    lap_u_ok: bool,
    lap_p_margin: f64,
    lap_p_ok: bool,
    item3_margin: f64,
    item3_ok: bool,
    linf: f64,
}

pub fn write_ab_report(path: &Path, report: &ABReport) -> std::io::Result<()> {
    let rows: Vec<AbCsvRow> = report
        .rows
        .iter()
        .map(|r| AbCsvRow {
            k: r.k,
            t: r.t,
            one_minus_x: r.one_minus_x,
            min_det: r.min_det,
            ma_ok: r.ma_ok,
            slack: r.slack,
            lap_u_margin: r.lap_u_margin,
            lap_u_ok: r.lap_u_ok,
            lap_p_margin: r.lap_p_margin,
            lap_p_ok: r.lap_p_ok,
            item3_margin: r.item3_margin,
            item3_ok: r.item3_ok,
            linf: r.linf,
        })
        .collect();
    write_rows(path, &rows)
}

/// `k, X_k, 1-X_k, k α X_k` as CSV text.
pub fn ab_sequence_csv<W: Write>(out: W, seq: &ABSequence) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "X_k", "one_minus_X_k", "k_alpha_X_k"]).map_err(csv_err)?;
    for (i, x) in seq.values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{x:.17e}"), format!("{:.17e}", 1.0 - x), format!("{:.17e}", seq.diagnostic[i])])
            .map_err(csv_err)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub name: String,
    pub k: usize,
    pub t: f64,
    /// Cells per axis; the first axis varies fastest in the data file.
    pub shape: Vec<usize>,
    pub dtype: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub periodic: Vec<bool>,
}

/// Writes `<name>.bin` (little-endian f64) and `<name>.json` into `dir`.
pub fn write_field(dir: &Path, name: &str, k: usize, t: f64, rho: &GridDensity) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let g = &rho.grid;
    let d = g.dim();
    let mut bytes = Vec::with_capacity(8 * rho.values.len());
    for v in &rho.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{name}.bin")), bytes)?;
    let header = FieldHeader {
        name: name.into(),
        k,
        t,
        shape: g.n[..d].to_vec(),
        dtype: "f64-le".into(),
        lo: g.domain.lo[..d].to_vec(),
        hi: g.domain.hi[..d].to_vec(),
        periodic: g.domain.periodic[..d].to_vec(),
    };
    let text = serde_json::to_string_pretty(&header).map_err(std::io::Error::other)?;
    fs::write(dir.join(format!("{name}.json")), text + "\n")
}

//! Tidy tables and run manifests.
//!
//! Table bodies are deterministic functions of the config. Wall-clock data
//! (timestamps, timings) goes only into `manifest.json`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::error::Result;
use crate::prime_sets::{density_audit, PrimeSet, PrimeSetDescriptor};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!(v.to_string()),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::render))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .cloned()
                        .zip(row.iter().map(Cell::to_json))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv_string(),
            OutputFormat::Json => Ok(serde_json::to_string_pretty(&self.to_json())? + "\n"),
        }
    }
}

/// Density audit summary embedded in every report that uses a prime set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSummary {
    pub prime_set: PrimeSetDescriptor,
    pub kappa_hat: f64,
    pub worst_x: u64,
    pub mertens_constant_hat: f64,
}

/// Powers of ten from 100 up to the limit, plus the limit.
pub fn audit_grid(limit: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut x = 100u64;
    while x < limit {
        grid.push(x);
        x = x.saturating_mul(10);
    }
    if limit >= 16 {
        grid.push(limit);
    }
    grid
}

pub fn audit_summary(ps: &PrimeSet) -> Result<AuditSummary> {
    let audit = density_audit(ps, &audit_grid(ps.limit()))?;
    Ok(AuditSummary {
        prime_set: ps.descriptor(),
        kappa_hat: audit.kappa_hat,
        worst_x: audit.worst_x,
        mertens_constant_hat: audit.mertens_constant_hat,
    })
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub tables: Vec<Table>,
    pub audits: Vec<AuditSummary>,
    /// Deterministic summary values (also written to the manifest).
    pub summary: Value,
    /// Non-deterministic extras such as timings; manifest only.
    pub timings: Value,
    pub passed: Option<bool>,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Report {
            experiment: experiment.to_string(),
            tables: Vec::new(),
            audits: Vec::new(),
            summary: Value::Null,
            timings: Value::Null,
            passed: None,
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Writes one file per table plus `manifest.json` and a replayable
/// `config.toml`; returns the written paths.
pub fn write_report(report: &Report, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let ext = match cfg.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let mut written = Vec::new();
    for table in &report.tables {
        let path = out_dir.join(format!("{}.{ext}", table.name));
        std::fs::write(&path, table.render(cfg.format)?)?;
        written.push(path);
    }
    let config_path = out_dir.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml_string()?)?;
    written.push(config_path);

    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "tool": "divlab",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": report.experiment,
        "created_unix": created,
        "seed": cfg.seed,
        "threads": rayon::current_num_threads(),
        "config": cfg,
        "prime_sets": report.audits,
        "outputs": written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect::<Vec<_>>(),
        "summary": report.summary,
        "timings": report.timings,
        "passed": report.passed,
    });
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    written.push(manifest_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    fn sample() -> Table {
        let mut t = Table::new("demo", &["a", "b", "note"]);
        t.push(vec![1u64.into(), 0.5.into(), "x, y".into()]);
        t.push(vec![2u64.into(), Cell::Empty, "plain".into()]);
        t
    }

    #[test]
    fn csv_uses_lf_and_quotes_commas() {
        let s = sample().to_csv_string().unwrap();
        assert_eq!(s, "a,b,note\n1,0.5,\"x, y\"\n2,,plain\n");
    }

    #[test]
    fn json_rows_are_objects() {
        let v = sample().to_json();
        assert_eq!(v[0]["note"], "x, y");
        assert!(v[1]["b"].is_null());
    }

    #[test]
    fn report_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = Report::new("verify");
        report.tables.push(sample());
        let cfg = ExperimentConfig::new(Experiment::Verify);
        let files = write_report(&report, &cfg, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let manifest: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["experiment"], "verify");
        let replay = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
        assert_eq!(replay, cfg);
    }

    #[test]
    fn audit_grid_shape() {
        assert_eq!(audit_grid(5000), vec![100, 1000, 5000]);
        assert_eq!(audit_grid(1000), vec![100, 1000]);
    }
}

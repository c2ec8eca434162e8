//! Report and table emission.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// One acceptance-style criterion checked by an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub pass: bool,
    /// The observed quantity the criterion constrains.
    pub observed: f64,
    /// The binding bound it was compared against.
    pub bound: f64,
    pub detail: String,
}

impl CriterionResult {
    pub fn le(name: &str, observed: f64, bound: f64, detail: impl Into<String>) -> Self {
        CriterionResult {
            name: name.to_string(),
            pass: observed <= bound,
            observed,
            bound,
            detail: detail.into(),
        }
    }

    pub fn ge(name: &str, observed: f64, bound: f64, detail: impl Into<String>) -> Self {
        CriterionResult {
            name: name.to_string(),
            pass: observed >= bound,
            observed,
            bound,
            detail: detail.into(),
        }
    }

    pub fn within(name: &str, observed: f64, target: f64, tol: f64, detail: impl Into<String>) -> Self {
        CriterionResult {
            name: name.to_string(),
            pass: (observed - target).abs() <= tol,
            observed,
            bound: tol,
            detail: format!("target {target:.6}; {}", detail.into()),
        }
    }
}

/// A CSV table produced by an experiment.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// The run report written to `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config_name: String,
    pub config_hash: String,
    pub code_version: String,
    /// Wall-clock timestamp; the only field excluded from determinism
    /// comparisons.
    pub generated_unix_ms: u64,
    pub cache_file: Option<String>,
    pub warnings: Vec<String>,
    pub estimates: BTreeMap<String, serde_json::Value>,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
    /// Echo of the parsed configuration.
    pub inputs: serde_json::Value,
}

impl Report {
    /// Serialization with the timestamp zeroed, for determinism comparisons.
    pub fn deterministic_bytes(&self) -> Vec<u8> {
        let mut clone = self.clone();
        clone.generated_unix_ms = 0;
        serde_json::to_vec_pretty(&clone).expect("report serializes")
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&serde_json::to_vec_pretty(self).expect("report serializes"))?;
        f.write_all(b"\n")
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.criteria {
            out.push(format!(
                "{}: {} [{}] observed {:.6} bound {:.6} {}",
                self.experiment,
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.observed,
                c.bound,
                c.detail
            ));
        }
        out
    }
}

/// Write tables as `tables/<name>.csv` with a header row; RFC-style quoting
/// via the csv crate.
pub fn write_tables(tables: &[Table], out_dir: &Path) -> anyhow::Result<()> {
    if tables.is_empty() {
        return Ok(());
    }
    let dir = out_dir.join("tables");
    std::fs::create_dir_all(&dir)?;
    for t in tables {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", t.name)))?;
        w.write_record(&t.header)?;
        for row in &t.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    Ok(())
}

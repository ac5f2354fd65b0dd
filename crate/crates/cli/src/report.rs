//! Report bundle: `report.json`, `tables/*.csv`, `plots/*.svg` and `run_meta.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::plot::{emit_plot, Plot};

pub const SCHEMA: &str = "mr-lab/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// One thresholded property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, tolerance: &str, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance: tolerance.into(),
            threshold,
            comparison: Comparison::AtMost,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: &str, value: f64, tolerance: &str, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance: tolerance.into(),
            threshold,
            comparison: Comparison::AtLeast,
            pass: value >= threshold,
        }
    }

    /// A boolean property recorded as `1` (pass) or `0`.
    pub fn flag(name: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: String::new(),
            threshold: 1.0,
            comparison: Comparison::AtLeast,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Table {
        Table { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

/// Formats a float for CSV cells; shortest round-trip representation.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub data: BTreeMap<String, Value>,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    /// Human-readable diagnostics echoed to stderr.
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn datum<T: Serialize>(&mut self, key: &str, v: T) -> Result<(), CliError> {
        self.data.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub schema: &'static str,
    pub subcommand: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub levels: Option<usize>,
    pub config: &'a Value,
    pub tolerances: &'a BTreeMap<String, f64>,
    pub pass: bool,
    pub checks: &'a [Check],
    pub data: &'a BTreeMap<String, Value>,
    pub tables: Vec<String>,
    pub plots: Vec<String>,
}

pub fn config_hash(config: &Value) -> String {
    let canon = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&canon))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(path.display().to_string(), e)
}

/// Writes everything except timing into `out`; timing goes to `run_meta.json`.
pub fn write_bundle(out: &Path, report: &Report, outcome: &Outcome, meta: &Value) -> Result<(), CliError> {
    std::fs::create_dir_all(out.join("tables")).map_err(io(out))?;
    std::fs::create_dir_all(out.join("plots")).map_err(io(out))?;
    for t in &outcome.tables {
        let path = out.join("tables").join(format!("{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.headers)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(io(&path))?;
    }
    for p in &outcome.plots {
        emit_plot(p, &out.join("plots").join(format!("{}.svg", p.name)))?;
    }
    let path = out.join("report.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io(&path))?;
    let path = out.join("run_meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(meta)? + "\n").map_err(io(&path))?;
    Ok(())
}

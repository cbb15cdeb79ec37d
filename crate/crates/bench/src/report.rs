//! Benchmark reports and their markdown, JSON and CSV renderings.
//!
//! JSON schema, version 1 (all accuracies in percent):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "metadata": {
//!     "backend": "dense" | "sparse",
//!     "backend_note": string,
//!     "versions": { crate name: version },
//!     "timestamp": RFC 3339 UTC string,
//!     "wall_time": seconds for the whole grid,
//!     "n_seeds": int, "base_seed": int,
//!     "config": { key: value }          // resolved spec, for the log
//!   },
//!   "cells": [ {
//!     "model": "gcn", "dataset": "cora",
//!     "status": "ok" | "partial" | "failed",
//!     "mean_accuracy": float | null,    // mean over successful seeds
//!     "std_accuracy": float | null,     // sample std (n - 1), 0 for one seed
//!     "wall_time": seconds summed over the cell's runs,
//!     "runs": [ { "seed": int, "accuracy": float | null,
//!                 "epochs": int | null, "error": string | null } ]
//!   } ]
//! }
//! ```
//!
//! `timestamp` and every `wall_time` are the only fields that vary between
//! identical runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use gallery_core::tensor::BackendId;
use gallery_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub backend: BackendId,
    pub backend_note: String,
    pub versions: BTreeMap<String, String>,
    pub timestamp: String,
    pub wall_time: f64,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub config: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Partial,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub epochs: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub dataset: String,
    pub status: CellStatus,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub wall_time: f64,
    pub runs: Vec<RunResult>,
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for a single
/// value). `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((mean, (ss / (n - 1) as f64).sqrt()))
}

impl Cell {
    /// Builds a cell and derives status and statistics from `runs`.
    pub fn from_runs(model: impl Into<String>, dataset: impl Into<String>, runs: Vec<RunResult>, wall_time: f64) -> Self {
        let ok: Vec<f64> = runs.iter().filter_map(|r| r.accuracy).collect();
        let stats = mean_std(&ok);
        let status = match ok.len() {
            0 => CellStatus::Failed,
            k if k == runs.len() => CellStatus::Ok,
            _ => CellStatus::Partial,
        };
        Self {
            model: model.into(),
            dataset: dataset.into(),
            status,
            mean_accuracy: stats.map(|s| s.0),
            std_accuracy: stats.map(|s| s.1),
            wall_time,
            runs,
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.accuracy).collect()
    }

    /// Stored statistics must equal a fresh recomputation bit for bit.
    pub fn check(&self) -> Result<()> {
        let fresh = mean_std(&self.accuracies());
        let stored = self.mean_accuracy.zip(self.std_accuracy);
        let same = match (fresh, stored) {
            (None, None) => true,
            (Some(a), Some(b)) => a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits(),
            _ => false,
        };
        if !same {
            return Err(Error::Contract(format!(
                "cell {}/{}: stored mean/std {stored:?} differ from per-seed values {fresh:?}",
                self.model, self.dataset
            )));
        }
        Ok(())
    }

    fn n_ok(&self) -> usize {
        self.runs.iter().filter(|r| r.accuracy.is_some()).count()
    }

    /// `81.25±0.88`, with a `(k/n)` suffix when some seeds failed.
    pub fn display(&self) -> String {
        match (self.mean_accuracy, self.std_accuracy) {
            (Some(m), Some(s)) if self.status == CellStatus::Ok => format!("{m:.2}±{s:.2}"),
            (Some(m), Some(s)) => format!("{m:.2}±{s:.2} ({}/{})", self.n_ok(), self.runs.len()),
            _ => "failed".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::NotFound {
                kind: "format",
                name: other.to_string(),
                available: "markdown, json, csv".into(),
            }),
        }
    }
}

impl BenchReport {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: Self = serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("bad report JSON: {e}")))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!("unsupported report schema version {}", r.schema_version)));
        }
        Ok(r)
    }

    /// Dataset names in first-appearance order.
    fn datasets(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.dataset.as_str()) {
                out.push(&c.dataset);
            }
        }
        out
    }

    fn grouped(&self) -> Vec<&Cell> {
        let mut out = Vec::with_capacity(self.cells.len());
        for d in self.datasets() {
            out.extend(self.cells.iter().filter(|c| c.dataset == d));
        }
        out
    }

    pub fn all_failed(&self) -> bool {
        !self.cells.is_empty() && self.cells.iter().all(|c| c.status == CellStatus::Failed)
    }
}

/// Serializes `report`. Every cell's statistics are rechecked first.
pub fn render_report(report: &BenchReport, format: Format) -> Result<Vec<u8>> {
    for c in &report.cells {
        c.check()?;
    }
    let backend = report.metadata.backend.as_str();
    Ok(match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(report).expect("report serializes");
            v.push(b'\n');
            v
        }
        // One row per backend, datasets as column groups, models within
        // each group, matching the usual results-table layout.
        Format::Markdown => {
            let cells = report.grouped();
            let mut head = String::from("| Backend |");
            let mut rule = String::from("|---|");
            let mut row = format!("| {backend} |");
            for c in &cells {
                let _ = write!(head, " {} / {} |", c.dataset, c.model.to_uppercase());
                rule.push_str("---|");
                let _ = write!(row, " {} |", c.display());
            }
            let mut out = format!("{head}\n{rule}\n");
            if !cells.is_empty() {
                out.push_str(&row);
                out.push('\n');
            }
            out.into_bytes()
        }
        Format::Csv => {
            let mut out = String::from("backend,dataset,model,status,n_ok,n_seeds,mean_accuracy,std_accuracy\n");
            for c in report.grouped() {
                let (m, s) = match (c.mean_accuracy, c.std_accuracy) {
                    (Some(m), Some(s)) => (format!("{m:.2}"), format!("{s:.2}")),
                    _ => (String::new(), String::new()),
                };
                let status = serde_json::to_value(c.status).expect("status serializes");
                let _ = writeln!(
                    out,
                    "{backend},{},{},{},{},{},{m},{s}",
                    csv_field(&c.dataset),
                    c.model,
                    status.as_str().unwrap_or_default(),
                    c.n_ok(),
                    c.runs.len()
                );
            }
            out.into_bytes()
        }
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

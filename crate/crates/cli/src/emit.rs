//! Report, summary and plot-data files.
//!
//! Floats are written with 17 significant digits so every value parses back
//! to the same binary64.

use std::path::Path;

use calderon_core::engine::DecayTable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::harness::{RunReport, StageStatus};
use crate::LabError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: String,
    pub files: Vec<ArtifactEntry>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn hash_of(&self, file: &str) -> Option<&str> {
        self.files.iter().find(|f| f.file == file).map(|f| f.sha256.as_str())
    }
}

/// Binary64 with 17 significant digits.
pub fn render(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// Columns: swept parameter, measured quantity, fitted geometric curve
/// (empty when the fit was skipped).
pub fn plot_csv(table: &DecayTable) -> String {
    let rows = table.values.iter().map(|&(p, v)| {
        let fit = match (table.scale, table.ratio) {
            (Some(s), Some(r)) => render(s * r.powi(p as i32)),
            _ => String::new(),
        };
        vec![p.to_string(), render(v), fit]
    });
    to_csv(&[&table.parameter, &table.quantity, "fit"], rows)
}

pub fn plot_file_name(index: usize, table: &DecayTable) -> String {
    format!("decay_{index:02}_{}.csv", table.quantity)
}

/// One row per stage, check and decay table.
pub fn summary_csv(report: &RunReport) -> String {
    let stages = report.stages.iter().map(|s| {
        let status = match s.status {
            StageStatus::Ok => "ok",
            StageStatus::Skipped => "skipped",
            StageStatus::Failed => "failed",
        };
        let reason = s.reason.clone().unwrap_or_default();
        vec!["stage".into(), s.name.clone(), reason, String::new(), String::new(), status.into(), String::new()]
    });
    let gates = report.gates.iter().map(|g| {
        vec![
            "check".into(),
            g.stage.clone(),
            g.name.clone(),
            render(g.value),
            render(g.tolerance),
            g.passed.to_string(),
            g.gating.to_string(),
        ]
    });
    let decay = report.decay.iter().map(|t| {
        vec![
            "decay_ratio".into(),
            "decay".into(),
            t.quantity.clone(),
            t.ratio.map(render).unwrap_or_default(),
            String::new(),
            t.monotone.to_string(),
            "false".into(),
        ]
    });
    to_csv(
        &["kind", "stage", "name", "value", "tolerance", "passed", "gating"],
        stages.chain(gates).chain(decay),
    )
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<ArtifactEntry, LabError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| LabError::Output { path, source: e })?;
    Ok(ArtifactEntry {
        file: name.into(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

/// Write `report.json`, `summary.csv`, one CSV per decay table, `timings.json`
/// and finally `manifest.json` with the hashes of the reproducible files.
pub fn write_artifacts(dir: &Path, report: &RunReport, timings: &[(String, f64)]) -> Result<Manifest, LabError> {
    let mut files = vec![
        write(dir, "report.json", json(report).as_bytes())?,
        write(dir, "summary.csv", summary_csv(report).as_bytes())?,
    ];
    let mut notes = Vec::new();
    if report.decay.is_empty() {
        notes.push("no decay tables; no plot-data files written".to_string());
    }
    for (i, t) in report.decay.iter().enumerate() {
        files.push(write(dir, &plot_file_name(i, t), plot_csv(t).as_bytes())?);
    }
    write(dir, "timings.json", json(&timings).as_bytes())?;
    notes.push("timings.json holds wall-clock seconds per stage and is not hashed".to_string());
    let manifest = Manifest {
        run: report.name.clone(),
        files,
        notes,
    };
    write(dir, "manifest.json", json(&manifest).as_bytes())?;
    Ok(manifest)
}

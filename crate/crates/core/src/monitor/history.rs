//! Append-only rank history, one JSON record per line.
//!
//! Lines are never rewritten. A (run, step, layer) cell may appear several
//! times; readers keep the last occurrence.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MonitorError;
use crate::temporal::Pooling;

/// One effective-rank measurement of a (run, checkpoint, layer) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub run_id: String,
    pub step: u64,
    pub layer: u32,
    pub rank_value: f64,
    pub retained_count: usize,
    pub n_sequences_used: usize,
    pub dim: usize,
    pub sample_seed: u64,
    #[serde(default)]
    pub pooling: Pooling,
    /// RFC 3339 UTC timestamp of the measurement.
    pub computed_at: String,
}

impl RankRecord {
    pub fn key(&self) -> (&str, u64, u32) {
        (&self.run_id, self.step, self.layer)
    }
}

pub fn append_history(path: impl AsRef<Path>, records: &[RankRecord]) -> Result<(), MonitorError> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| MonitorError::file(parent, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| MonitorError::file(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("rank record serializes");
        writeln!(w, "{line}").map_err(|e| MonitorError::file(path, e))?;
    }
    w.flush().map_err(|e| MonitorError::file(path, e))
}

/// Every record in file order. Blank lines are skipped.
pub fn read_history(path: impl AsRef<Path>) -> Result<Vec<RankRecord>, MonitorError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| MonitorError::file(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| MonitorError::file(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| MonitorError::History {
            line: i as u64 + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Latest record per (run, step, layer), ordered by that key.
pub fn latest(records: &[RankRecord]) -> Vec<RankRecord> {
    let mut by_key: BTreeMap<(String, u64, u32), &RankRecord> = BTreeMap::new();
    for r in records {
        by_key.insert((r.run_id.clone(), r.step, r.layer), r);
    }
    by_key.into_values().cloned().collect()
}

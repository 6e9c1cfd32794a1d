//! Walks a run's dumps and measures every (step, layer) cell.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::history::{append_history, RankRecord};
use super::manifest::RunManifest;
use super::MonitorError;
use crate::ingest::{read_container_file, sample_indices};
use crate::temporal::rankme_t_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    /// Upper bound on concurrently processed cells; 0 is treated as 1.
    pub workers: usize,
    /// Append the new records to the manifest's history file.
    pub append_history: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            append_history: true,
        }
    }
}

/// A cell whose container was missing.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct CellGap {
    pub step: u64,
    pub layer: u32,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    /// One record per measured cell, ordered by (step, layer).
    pub records: Vec<RankRecord>,
    pub gaps: Vec<CellGap>,
    /// Positions drawn from each measured cell's container.
    pub sample_indices: BTreeMap<(u64, u32), Vec<usize>>,
}

enum Cell {
    Measured(RankRecord, Vec<usize>),
    Gap(CellGap),
}

fn measure(manifest: &RunManifest, step: u64, layer: u32, now: &str) -> Result<Cell, MonitorError> {
    let path = manifest.container_path(step, layer);
    let set = match read_container_file(&path) {
        Ok(set) => set,
        Err(e) if e.is_not_found() => return Ok(Cell::Gap(CellGap { step, layer, path })),
        Err(e) => return Err(MonitorError::cell(step, layer, e)),
    };
    let idx = sample_indices(set.len(), manifest.sample_k, manifest.sample_seed)
        .map_err(|e| MonitorError::cell(step, layer, e))?;
    let subset = set.select(&idx);
    let rank = rankme_t_with(&subset, manifest.pooling).map_err(|e| MonitorError::cell(step, layer, e))?;
    Ok(Cell::Measured(
        RankRecord {
            run_id: manifest.run_id.clone(),
            step,
            layer,
            rank_value: rank.value,
            retained_count: rank.retained_count,
            n_sequences_used: subset.len(),
            dim: subset.dim(),
            sample_seed: manifest.sample_seed,
            pooling: manifest.pooling,
            computed_at: now.to_string(),
        },
        idx,
    ))
}

/// Measures RankMe-t for every (step, layer) cell of the run.
///
/// Every cell draws its subset with the manifest's `(sample_k, sample_seed)`,
/// so cells whose containers hold the same number of sequences use the same
/// positions. Missing containers become gaps; any other failure aborts the
/// scan. Results are ordered by (step, layer) whatever the worker count, and
/// the history is written by this thread alone after all cells finish.
pub fn scan_run(manifest: &RunManifest, options: &ScanOptions) -> Result<ScanOutcome, MonitorError> {
    manifest.validate()?;
    if !manifest.root.is_dir() {
        return Err(MonitorError::RootUnreadable {
            path: manifest.root.clone(),
        });
    }
    let cells: Vec<(u64, u32)> = manifest
        .steps
        .iter()
        .flat_map(|&s| manifest.layers.iter().map(move |&l| (s, l)))
        .collect();
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);

    let results: Mutex<Vec<Option<Result<Cell, MonitorError>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = options.workers.clamp(1, cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(step, layer)) = cells.get(i) else {
                    break;
                };
                let r = measure(manifest, step, layer, &now);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });

    let mut outcome = ScanOutcome {
        records: Vec::new(),
        gaps: Vec::new(),
        sample_indices: BTreeMap::new(),
    };
    let mut dims: BTreeMap<u32, (u64, usize)> = BTreeMap::new();
    for r in results.into_inner().expect("workers joined") {
        match r.expect("every cell visited")? {
            Cell::Measured(rec, idx) => {
                match dims.get(&rec.layer) {
                    Some(&(first_step, d)) if d != rec.dim => {
                        return Err(MonitorError::DimensionDrift {
                            layer: rec.layer,
                            first_step,
                            expected: d,
                            step: rec.step,
                            got: rec.dim,
                        })
                    }
                    Some(_) => {}
                    None => {
                        dims.insert(rec.layer, (rec.step, rec.dim));
                    }
                }
                outcome.sample_indices.insert((rec.step, rec.layer), idx);
                outcome.records.push(rec);
            }
            Cell::Gap(g) => outcome.gaps.push(g),
        }
    }
    if options.append_history && !outcome.records.is_empty() {
        append_history(manifest.history_path(), &outcome.records)?;
    }
    Ok(outcome)
}

//! Run manifests, scanning checkpoints into a rank history, and correlating
//! that history with downstream metrics.

mod history;
mod manifest;
mod report;
mod scan;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ingest::IngestError;
use crate::temporal::TemporalError;

pub use history::{append_history, latest, read_history, RankRecord};
pub use manifest::{default_container_path, RunManifest, DEFAULT_HISTORY};
pub use report::{
    correlate_run, emit_report, join, rank_series_file, round_sig, scatter_file, write_plot_data,
    BestLayerRow, CorrelationReport, Diagnostics, GroupRow, InsufficientGroup, ReportFormat,
    REPORT_SCHEMA_VERSION, REPORT_SIG_DIGITS,
};
pub use scan::{scan_run, CellGap, ScanOptions, ScanOutcome};

/// What went wrong while measuring one cell.
#[derive(Debug, Error)]
pub enum CellFailure {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
}

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("invalid manifest: {reason}")]
    InvalidManifest { reason: String },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("history line {line}: {reason}")]
    History { line: u64, reason: String },
    #[error("rank history {} holds no records", path.display())]
    EmptyHistory { path: PathBuf },
    #[error("run root {} is not a readable directory", path.display())]
    RootUnreadable { path: PathBuf },
    #[error("step {step}, layer {layer}: {source}")]
    Cell {
        step: u64,
        layer: u32,
        #[source]
        source: CellFailure,
    },
    #[error("layer {layer} changed dimension: {expected} at step {first_step}, {got} at step {step}")]
    DimensionDrift {
        layer: u32,
        first_step: u64,
        expected: usize,
        step: u64,
        got: usize,
    },
    #[error(
        "no rank record matches any metric row ({} unmatched metric keys, {} unmatched rank keys)",
        unmatched_metric_keys.len(),
        unmatched_rank_keys.len()
    )]
    EmptyJoin {
        unmatched_metric_keys: Vec<String>,
        unmatched_rank_keys: Vec<String>,
    },
}

impl MonitorError {
    pub(crate) fn file(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        MonitorError::File {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn cell(step: u64, layer: u32, e: impl Into<CellFailure>) -> Self {
        MonitorError::Cell {
            step,
            layer,
            source: e.into(),
        }
    }
}

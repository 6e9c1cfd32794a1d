//! Reading and writing embedding dumps and metric tables, and seeded
//! subset sampling.

pub mod container;
pub mod metrics;
pub mod sampling;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use container::{
    container_len, read_container, read_container_file, read_header, write_container, write_container_file,
    ContainerHeader, Dtype, HEADER_LEN, MAGIC, VERSION,
};
pub use metrics::{read_metrics, read_metrics_file, write_metrics, DownstreamRecord, Orientation};
pub use sampling::{sample_indices, sample_sequences, SplitMix64};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("bad magic at offset {offset} (found {:?})", String::from_utf8_lossy(found))]
    BadMagic { offset: u64, found: [u8; 4] },
    #[error("unsupported container version {version} at offset {offset}")]
    UnsupportedVersion { offset: u64, version: u32 },
    #[error("unsupported dtype code {code} at offset {offset}")]
    UnsupportedDtype { offset: u64, code: u8 },
    #[error("invalid header field at offset {offset}: {reason}")]
    InvalidHeader { offset: u64, reason: String },
    #[error("truncated at offset {offset}: expected {expected} bytes, {available} available")]
    Truncated {
        offset: u64,
        expected: u64,
        available: u64,
    },
    #[error("sequence {sequence} at offset {offset} has length 0")]
    EmptySequence { offset: u64, sequence: usize },
    #[error("non-finite value at offset {offset} (sequence {sequence}, frame {frame}, column {col})")]
    NonFinite {
        offset: u64,
        sequence: usize,
        frame: usize,
        col: usize,
    },
    #[error("unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: u64 },
    #[error(
        "value {value} (sequence {sequence}, frame {frame}, column {col}) does not fit the storage dtype"
    )]
    OutOfRange {
        sequence: usize,
        frame: usize,
        col: usize,
        value: f64,
    },
    #[error("sample size {k} out of range for {n} sequences (need 1 <= k <= n)")]
    SampleRange { k: usize, n: usize },
    #[error("duplicate metrics key ({key}) on lines {first_line} and {line}")]
    DuplicateKey { key: String, first_line: u64, line: u64 },
    #[error("unknown orientation '{token}' on line {line} (expected higher or lower)")]
    UnknownOrientation { line: u64, token: String },
    #[error("non-numeric metric value '{value}' on line {line}")]
    NonNumericMetric { line: u64, value: String },
    #[error("metrics table line {line}: {reason}")]
    Metrics { line: u64, reason: String },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub(crate) fn io_at(path: &Path, source: std::io::Error) -> Self {
        IngestError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    /// True when the file simply does not exist.
    pub fn is_not_found(&self) -> bool {
        matches!(self, IngestError::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

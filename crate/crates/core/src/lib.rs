//! Label-free quality monitoring for sequence-embedding models.
//!
//! The effective rank of pooled embeddings tracks how many dimensions a
//! model's representations actually occupy. This crate computes it for
//! ragged sets of frame sequences, tracks it across training checkpoints and
//! layers, and measures how well it orders checkpoints by downstream metrics.
//!
//! * [`spectral`]: singular spectra and effective rank of a matrix.
//! * [`temporal`]: ragged sequence sets and their sum-pooled rank.
//! * [`ingest`]: the RKMT container, seeded sampling, metric tables.
//! * [`stats`]: Kendall τ-b with tie handling and p-values.
//! * [`monitor`]: run manifests, scans, rank history, correlation reports.
//! * [`synth`]: planted-spectrum fixtures and synthetic runs.
//!
//! ```
//! use seqrank::spectral::{effective_rank, SingularSpectrum};
//!
//! let s = SingularSpectrum::new(vec![4.0, 2.0, 1.0, 1.0]).unwrap();
//! let r = effective_rank(&s).unwrap();
//! assert!((r.value - 3.363586).abs() < 1e-6);
//! ```

mod error;
pub mod ingest;
pub mod monitor;
pub mod spectral;
pub mod stats;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};

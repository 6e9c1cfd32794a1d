use thiserror::Error;

use crate::ingest::IngestError;
use crate::monitor::MonitorError;
use crate::spectral::SpectralError;
use crate::stats::StatsError;
use crate::synth::SynthError;
use crate::temporal::TemporalError;

/// Any failure of the library, for callers that do not care which stage failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Temporal(#[from] TemporalError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    /// A failure that no input could have caused.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit status: 2 for errors caused by inputs or flags, 1 for
    /// internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Effective rank of variable-length embedding sequences.
//!
//! Each sample is a sequence of `T_i` frame embeddings of dimension `d`.
//! Conceptually the sequences are zero-padded to the longest length
//! `T_max`, the per-timestep `n × d` matrices `Z¹ … Z^T_max` are summed, and
//! the effective rank of the sum is taken. Padding contributes nothing to the
//! sum, so this equals summing each sequence over its own frames
//! ([`temporal_pool`]); [`padded_stack_sum`] computes the timestep-major form
//! without materializing the padding.

use thiserror::Error;

use crate::spectral::{self, EffectiveRank, EmbeddingMatrix, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemporalError {
    #[error("embedding sequence set is empty")]
    EmptySet,
    #[error("sequence {index} has no frames")]
    EmptySequence { index: usize },
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("sequence {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("frame storage of {len} values is not a multiple of dimension {dim}")]
    RaggedFrames { len: usize, dim: usize },
    #[error("non-finite value {value} in sequence {sequence}, frame {frame}, column {col}")]
    NonFinite {
        sequence: usize,
        frame: usize,
        col: usize,
        value: f64,
    },
    #[error("pooled row {row} overflowed to a non-finite value")]
    PoolOverflow { row: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One sample: `len()` frames of `dim()` values each, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    dim: usize,
    frames: Vec<f64>,
}

impl EmbeddingSequence {
    pub fn new(dim: usize, frames: Vec<f64>) -> Result<Self, TemporalError> {
        if dim == 0 {
            return Err(TemporalError::ZeroDimension);
        }
        if !frames.len().is_multiple_of(dim) {
            return Err(TemporalError::RaggedFrames {
                len: frames.len(),
                dim,
            });
        }
        if frames.is_empty() {
            return Err(TemporalError::EmptySequence { index: 0 });
        }
        if let Some(pos) = frames.iter().position(|v| !v.is_finite()) {
            return Err(TemporalError::NonFinite {
                sequence: 0,
                frame: pos / dim,
                col: pos % dim,
                value: frames[pos],
            });
        }
        Ok(Self { dim, frames })
    }

    /// Builds a sequence from a list of frames of equal dimension.
    pub fn from_frames<F: AsRef<[f64]>>(frames: &[F]) -> Result<Self, TemporalError> {
        let dim = frames.first().map_or(0, |f| f.as_ref().len());
        if dim == 0 {
            return Err(if frames.is_empty() {
                TemporalError::EmptySequence { index: 0 }
            } else {
                TemporalError::ZeroDimension
            });
        }
        let mut data = Vec::with_capacity(frames.len() * dim);
        for f in frames {
            let f = f.as_ref();
            if f.len() != dim {
                return Err(TemporalError::RaggedFrames {
                    len: data.len() + f.len(),
                    dim,
                });
            }
            data.extend_from_slice(f);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of frames, `T_i`.
    pub fn len(&self) -> usize {
        self.frames.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.frames.chunks_exact(self.dim)
    }

    /// All frame values, row-major.
    pub fn as_slice(&self) -> &[f64] {
        &self.frames
    }

    /// Multiplies every frame value by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, TemporalError> {
        Self::new(self.dim, self.frames.iter().map(|v| v * factor).collect())
    }
}

/// `n ≥ 1` sequences sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequenceSet {
    dim: usize,
    max_length: usize,
    sequences: Vec<EmbeddingSequence>,
}

impl EmbeddingSequenceSet {
    pub fn new(sequences: Vec<EmbeddingSequence>) -> Result<Self, TemporalError> {
        let first = sequences.first().ok_or(TemporalError::EmptySet)?;
        let dim = first.dim;
        if let Some((index, s)) = sequences.iter().enumerate().find(|(_, s)| s.dim != dim) {
            return Err(TemporalError::DimensionMismatch {
                index,
                expected: dim,
                got: s.dim,
            });
        }
        let max_length = sequences.iter().map(EmbeddingSequence::len).max().unwrap_or(0);
        Ok(Self {
            dim,
            max_length,
            sequences,
        })
    }

    /// Every row of `m` becomes a length-1 sequence.
    pub fn from_matrix(m: &EmbeddingMatrix) -> Self {
        let sequences = (0..m.rows())
            .map(|i| EmbeddingSequence {
                dim: m.cols(),
                frames: m.row(i).to_vec(),
            })
            .collect();
        Self {
            dim: m.cols(),
            max_length: 1,
            sequences,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sequences, `n`.
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Longest sequence length, `T_max`.
    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn sequences(&self) -> &[EmbeddingSequence] {
        &self.sequences
    }

    pub fn get(&self, i: usize) -> Option<&EmbeddingSequence> {
        self.sequences.get(i)
    }

    pub fn into_sequences(self) -> Vec<EmbeddingSequence> {
        self.sequences
    }

    /// Total number of frames across all sequences.
    pub fn total_frames(&self) -> usize {
        self.sequences.iter().map(EmbeddingSequence::len).sum()
    }

    /// New set holding clones of the sequences at `indices`, in that order.
    ///
    /// # Panics
    /// If `indices` is empty or any index is out of range.
    pub fn select(&self, indices: &[usize]) -> Self {
        assert!(!indices.is_empty(), "selection must be nonempty");
        let sequences: Vec<_> = indices.iter().map(|&i| self.sequences[i].clone()).collect();
        let max_length = sequences.iter().map(EmbeddingSequence::len).max().unwrap_or(0);
        Self {
            dim: self.dim,
            max_length,
            sequences,
        }
    }
}

/// How frames are reduced to one vector per sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// `Σ_t e_i^t`.
    #[default]
    Sum,
    /// `(1/T_i)·Σ_t e_i^t`.
    Mean,
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pooling::Sum => "sum",
            Pooling::Mean => "mean",
        })
    }
}

impl std::str::FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Pooling::Sum),
            "mean" => Ok(Pooling::Mean),
            other => Err(format!("unknown pooling '{other}' (expected sum or mean)")),
        }
    }
}

fn finish(set: &EmbeddingSequenceSet, data: Vec<f64>) -> Result<EmbeddingMatrix, TemporalError> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(TemporalError::PoolOverflow { row: pos / set.dim });
    }
    Ok(EmbeddingMatrix::from_trusted(set.len(), set.dim, data))
}

/// Sums each sequence over its frames: row `i` is `Σ_{t<T_i} e_i^t`.
///
/// Each row is accumulated sequentially in frame order, so the result is
/// deterministic.
pub fn temporal_pool(set: &EmbeddingSequenceSet) -> Result<EmbeddingMatrix, TemporalError> {
    let d = set.dim;
    let mut data = vec![0.0; set.len() * d];
    for (row, seq) in data.chunks_exact_mut(d).zip(&set.sequences) {
        for frame in seq.frames() {
            for (acc, v) in row.iter_mut().zip(frame) {
                *acc += v;
            }
        }
    }
    finish(set, data)
}

/// `Z¹ + … + Z^T_max` over the zero-padded per-timestep matrices.
///
/// Walks timesteps in the outer loop; a sequence shorter than the current
/// timestep contributes its zero padding, i.e. nothing. Each row sees the
/// same additions in the same order as in [`temporal_pool`], so the two agree
/// exactly.
pub fn padded_stack_sum(set: &EmbeddingSequenceSet) -> Result<EmbeddingMatrix, TemporalError> {
    let d = set.dim;
    let mut data = vec![0.0; set.len() * d];
    for t in 0..set.max_length {
        for (row, seq) in data.chunks_exact_mut(d).zip(&set.sequences) {
            if t < seq.len() {
                for (acc, v) in row.iter_mut().zip(seq.frame(t)) {
                    *acc += v;
                }
            }
        }
    }
    finish(set, data)
}

/// Per-sequence mean of the frames: row `i` is `(1/T_i)·Σ_t e_i^t`.
pub fn mean_pool(set: &EmbeddingSequenceSet) -> Result<EmbeddingMatrix, TemporalError> {
    let summed = temporal_pool(set)?;
    let d = set.dim;
    let mut data = summed.into_vec();
    for (row, seq) in data.chunks_exact_mut(d).zip(&set.sequences) {
        let len = seq.len() as f64;
        for v in row.iter_mut() {
            *v /= len;
        }
    }
    finish(set, data)
}

pub fn pool(set: &EmbeddingSequenceSet, pooling: Pooling) -> Result<EmbeddingMatrix, TemporalError> {
    match pooling {
        Pooling::Sum => temporal_pool(set),
        Pooling::Mean => mean_pool(set),
    }
}

/// Effective rank of the sum-pooled set.
pub fn rankme_t(set: &EmbeddingSequenceSet) -> Result<EffectiveRank, TemporalError> {
    rankme_t_with(set, Pooling::Sum)
}

/// Effective rank of the mean-pooled set. Equal to [`rankme_t`] when every
/// sequence has the same length; otherwise the per-sequence rescaling can
/// change the result.
pub fn rankme_t_mean(set: &EmbeddingSequenceSet) -> Result<EffectiveRank, TemporalError> {
    rankme_t_with(set, Pooling::Mean)
}

pub fn rankme_t_with(set: &EmbeddingSequenceSet, pooling: Pooling) -> Result<EffectiveRank, TemporalError> {
    Ok(spectral::rankme(&pool(set, pooling)?)?)
}

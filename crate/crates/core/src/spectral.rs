//! Singular spectra and the effective rank of an embedding matrix.
//!
//! The effective rank of a matrix `Z` with singular values `σ` is
//! `exp(H(p))` where `p_i = σ_i / ‖σ‖₁` and `H` is the Shannon entropy in
//! nats. It is a soft count of the dimensions the embeddings actually use:
//! 1 for a rank-one matrix, `k` for `k` equal singular values.
//!
//! Two routes compute the spectrum. The direct route runs a full SVD. The
//! Gram route eigendecomposes the `d × d` cross-product matrix and takes
//! square roots, which is much cheaper for tall matrices (`n ≫ d`).
//! [`singular_values`] picks the Gram route when `n > 4·d`, and falls back
//! to the SVD when the Gram spectrum reaches below what that route resolves.

mod symmetric;

use nalgebra::DMatrix;
use thiserror::Error;

/// Singular values below `RELATIVE_CUTOFF · σ₁` are treated as exact zeros.
pub const RELATIVE_CUTOFF: f64 = 1e-12;

/// The Gram route is used when `rows > GRAM_ASPECT · cols`.
pub const GRAM_ASPECT: usize = 4;

/// Smallest `σ / σ₁` the Gram route is trusted to resolve. Squaring the
/// matrix leaves singular values below roughly `√ε·σ₁` at the noise floor,
/// so automatic selection redoes the SVD when any value falls under this
/// ratio, true zeros included.
pub const GRAM_TRUSTED_RATIO: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("embedding matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("embedding matrix storage holds {got} values, expected {rows}x{cols}={}", rows * cols)]
    ShapeMismatch { rows: usize, cols: usize, got: usize },
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("invalid singular spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("zero embedding: rank undefined")]
    ZeroEmbedding,
}

/// A dense `n × d` matrix of embeddings, one sample per row, row-major.
///
/// Every value is finite; construction rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SpectralError> {
        if rows == 0 || cols == 0 {
            return Err(SpectralError::EmptyMatrix { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(SpectralError::ShapeMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite {
                row: pos / cols,
                col: pos % cols,
                value: data[pos],
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row vectors, which must all have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, SpectralError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(SpectralError::ShapeMismatch {
                    rows: rows.len(),
                    cols,
                    got: data.len() + r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// `n × n` identity.
    pub fn identity(n: usize) -> Result<Self, SpectralError> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::new(n, n, data)
    }

    /// Constructor for data already known to be finite and correctly shaped.
    pub(crate) fn from_trusted(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows >= 1 && cols >= 1 && data.len() == rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Multiplies every entry by `factor`. Fails if the result overflows.
    pub fn scaled(&self, factor: f64) -> Result<Self, SpectralError> {
        Self::new(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    fn transposed_data(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.data.len()];
        for (i, row) in self.data.chunks_exact(self.cols).enumerate() {
            for (j, &v) in row.iter().enumerate() {
                t[j * self.rows + i] = v;
            }
        }
        t
    }
}

/// Singular values of a matrix, sorted nonincreasing, all `≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
    source_dims: (usize, usize),
}

impl SingularSpectrum {
    /// Wraps a caller-supplied spectrum. The values must be finite,
    /// nonnegative and nonincreasing. The source shape is taken to be square.
    pub fn new(values: Vec<f64>) -> Result<Self, SpectralError> {
        let len = values.len();
        Self::with_dims(values, (len, len))
    }

    /// Like [`SingularSpectrum::new`] but records the shape of the matrix the
    /// values came from; `values.len()` must equal `min(n, d)`.
    pub fn with_dims(values: Vec<f64>, source_dims: (usize, usize)) -> Result<Self, SpectralError> {
        if values.is_empty() {
            return Err(SpectralError::InvalidSpectrum("empty spectrum".into()));
        }
        if values.len() != source_dims.0.min(source_dims.1) {
            return Err(SpectralError::InvalidSpectrum(format!(
                "{} values for a {}x{} matrix",
                values.len(),
                source_dims.0,
                source_dims.1
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(SpectralError::InvalidSpectrum(format!(
                "value {v} is not a finite nonnegative number"
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(SpectralError::InvalidSpectrum(format!(
                "values not sorted nonincreasing at index {}",
                i + 1
            )));
        }
        Ok(Self { values, source_dims })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }
}

/// Effective rank of a spectrum.
///
/// `value` lies in `[1, retained_count]` where `retained_count` is the number
/// of singular values that survived the relative zero cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRank {
    pub value: f64,
    pub retained_count: usize,
}

/// How [`singular_values_with`] computes the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumMethod {
    /// Gram route for tall matrices (`n > 4·d`) whose spectrum stays above
    /// [`GRAM_TRUSTED_RATIO`], full SVD otherwise.
    #[default]
    Auto,
    /// Full singular value decomposition of the matrix itself.
    Svd,
    /// Eigenvalues of the smaller cross-product matrix (`ZᵀZ` or `ZZᵀ`).
    Gram,
}

impl SpectrumMethod {
    fn resolve(self, rows: usize, cols: usize) -> Self {
        match self {
            SpectrumMethod::Auto if rows > GRAM_ASPECT * cols => SpectrumMethod::Gram,
            SpectrumMethod::Auto => SpectrumMethod::Svd,
            m => m,
        }
    }
}

pub fn singular_values(m: &EmbeddingMatrix) -> SingularSpectrum {
    singular_values_with(m, SpectrumMethod::Auto)
}

pub fn singular_values_with(m: &EmbeddingMatrix, method: SpectrumMethod) -> SingularSpectrum {
    let mut values = match (method, method.resolve(m.rows, m.cols)) {
        (SpectrumMethod::Auto, SpectrumMethod::Gram) => {
            let v = gram_singular_values(m);
            let top = v.iter().copied().fold(0.0, f64::max);
            if v.iter().any(|&s| s < GRAM_TRUSTED_RATIO * top) {
                svd_singular_values(m)
            } else {
                v
            }
        }
        (_, SpectrumMethod::Gram) => gram_singular_values(m),
        _ => svd_singular_values(m),
    };
    values.sort_by(|a, b| b.total_cmp(a));
    SingularSpectrum {
        values,
        source_dims: (m.rows, m.cols),
    }
}

fn svd_singular_values(m: &EmbeddingMatrix) -> Vec<f64> {
    let dm = DMatrix::from_row_slice(m.rows, m.cols, &m.data);
    dm.singular_values().iter().map(|v| v.max(0.0)).collect()
}

/// Eigenvalues of `ZᵀZ` (or `ZZᵀ` for wide matrices) are the squared
/// singular values. Eigenvalues at the rounding-noise floor of the cross
/// product are clamped to zero before taking square roots: forming the Gram
/// matrix squares the condition number, so a true zero comes back as
/// `±O(ε·λ_max)` and would otherwise surface as a spurious `√ε`-sized
/// singular value.
fn gram_singular_values(m: &EmbeddingMatrix) -> Vec<f64> {
    let (count, len, vectors) = if m.rows >= m.cols {
        (m.cols, m.rows, m.transposed_data())
    } else {
        (m.rows, m.cols, m.data.clone())
    };
    let g = symmetric::gram(&vectors, count, len);
    let eig = symmetric::symmetric_eigenvalues(g, count);
    let lambda_max = eig.iter().copied().fold(0.0f64, f64::max);
    let floor = gram_noise_floor(count, len) * lambda_max;
    eig.into_iter()
        .map(|l| if l <= floor { 0.0 } else { l.sqrt() })
        .collect()
}

/// Relative eigenvalue noise floor of a Gram matrix of `count` vectors of
/// length `len`.
fn gram_noise_floor(count: usize, len: usize) -> f64 {
    GRAM_NOISE_FACTOR * ((count + len) as f64).sqrt() * f64::EPSILON
}

const GRAM_NOISE_FACTOR: f64 = 16.0;

/// `exp` of the entropy of the ℓ1-normalized spectrum, natural log.
///
/// Values below [`RELATIVE_CUTOFF`] times the largest value are dropped
/// before normalization, and `0·log 0` is taken as 0.
pub fn effective_rank(s: &SingularSpectrum) -> Result<EffectiveRank, SpectralError> {
    let top = s.largest();
    if top <= 0.0 {
        return Err(SpectralError::ZeroEmbedding);
    }
    let cutoff = RELATIVE_CUTOFF * top;
    let retained: Vec<f64> = s.values.iter().copied().filter(|&v| v >= cutoff).collect();
    let l1: f64 = retained.iter().sum();
    let entropy: f64 = retained
        .iter()
        .map(|&v| {
            let p = v / l1;
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum();
    let retained_count = retained.len();
    let value = entropy.exp().clamp(1.0, retained_count as f64);
    Ok(EffectiveRank {
        value,
        retained_count,
    })
}

/// Effective rank of an embedding matrix: spectrum, then entropy.
pub fn rankme(m: &EmbeddingMatrix) -> Result<EffectiveRank, SpectralError> {
    effective_rank(&singular_values(m))
}

pub fn rankme_with(m: &EmbeddingMatrix, method: SpectrumMethod) -> Result<EffectiveRank, SpectralError> {
    effective_rank(&singular_values_with(m, method))
}

//! C interface to `seqrank`.
//!
//! Every fallible function returns an [`SrkStatus`] and writes its result
//! through an out-pointer only on [`SrkStatus::Ok`]. On failure a message is
//! kept per thread and can be read with [`srk_last_error`]. Sequence sets are
//! opaque [`SrkSequenceSet`] handles owned by the caller and released with
//! [`srk_sequence_set_free`]. Panics never cross the boundary; they surface
//! as [`SrkStatus::Internal`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use seqrank::ingest::{read_container_file, sample_sequences, write_container_file, Dtype, IngestError};
use seqrank::spectral::{
    effective_rank, rankme, EffectiveRank, EmbeddingMatrix, SingularSpectrum, SpectralError,
};
use seqrank::stats::{kendall_tau, PValueMethod, StatsError};
use seqrank::temporal::{rankme_t_with, EmbeddingSequence, EmbeddingSequenceSet, Pooling, TemporalError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrkStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was out of range or inconsistent.
    InvalidArgument = 2,
    /// The file could not be opened, read or written.
    Io = 3,
    /// The file is not a well-formed container.
    Format = 4,
    /// The result is undefined for this input, e.g. an all-zero matrix.
    Degenerate = 5,
    /// A bug in the library.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrkPooling {
    Sum = 0,
    Mean = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrkPMethod {
    Exact = 0,
    Normal = 1,
    Undefined = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrkRank {
    pub value: f64,
    /// Singular values that survived the relative zero cutoff.
    pub retained: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrkKendall {
    /// NaN when `has_tau` is 0.
    pub tau: f64,
    /// NaN when `has_tau` is 0.
    pub p_value: f64,
    pub has_tau: u8,
    pub p_method: SrkPMethod,
    pub n: u64,
    pub concordant: u64,
    pub discordant: u64,
    pub ties_x: u64,
    pub ties_y: u64,
    pub ties_xy: u64,
}

/// A ragged set of embedding sequences sharing one dimension.
pub struct SrkSequenceSet {
    inner: EmbeddingSequenceSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SrkStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(SrkStatus::NullArgument, format!("{what} is null"))
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Failure(SrkStatus::InvalidArgument, msg.into())
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        let status = match e {
            SpectralError::ZeroEmbedding => SrkStatus::Degenerate,
            _ => SrkStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<TemporalError> for Failure {
    fn from(e: TemporalError) -> Self {
        match e {
            TemporalError::Spectral(s) => s.into(),
            e => Failure(SrkStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::File { .. } | IngestError::Io(_) => SrkStatus::Io,
            IngestError::SampleRange { .. } | IngestError::OutOfRange { .. } => SrkStatus::InvalidArgument,
            _ => SrkStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure(SrkStatus::InvalidArgument, e.to_string())
    }
}

/// Runs `f`, records any failure, and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SrkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SrkStatus::Internal
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(Failure::null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure::invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn set_arg<'a>(set: *const SrkSequenceSet) -> Result<&'a EmbeddingSequenceSet, Failure> {
    set.as_ref().map(|s| &s.inner).ok_or_else(|| Failure::null("set"))
}

unsafe fn put<T>(out: *mut T, value: T) {
    out.write(value);
}

fn boxed(set: EmbeddingSequenceSet) -> *mut SrkSequenceSet {
    Box::into_raw(Box::new(SrkSequenceSet { inner: set }))
}

fn rank_out(r: EffectiveRank) -> SrkRank {
    SrkRank {
        value: r.value,
        retained: r.retained_count,
    }
}

/// Message describing the last failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn srk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Reads an RKMT container file.
#[no_mangle]
pub unsafe extern "C" fn srk_read_container(path: *const c_char, out: *mut *mut SrkSequenceSet) -> SrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let set = read_container_file(path_arg(path)?)?;
        put(out, boxed(set));
        Ok(())
    })
}

/// Writes `set` as an RKMT container; `dtype` is 0 for f32, 1 for f64.
#[no_mangle]
pub unsafe extern "C" fn srk_write_container(
    set: *const SrkSequenceSet,
    path: *const c_char,
    dtype: u8,
) -> SrkStatus {
    guard(|| {
        let set = set_arg(set)?;
        let dtype =
            Dtype::from_code(dtype).ok_or_else(|| Failure::invalid(format!("unknown dtype {dtype}")))?;
        write_container_file(set, dtype, path_arg(path)?)?;
        Ok(())
    })
}

/// Builds a set from `n` sequences. Sequence `i` has `lengths[i]` frames of
/// `dim` values; `frames` holds all of them back to back, row-major.
#[no_mangle]
pub unsafe extern "C" fn srk_sequence_set_new(
    dim: usize,
    lengths: *const usize,
    n: usize,
    frames: *const f64,
    out: *mut *mut SrkSequenceSet,
) -> SrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let lengths = slice_arg(lengths, n, "lengths")?;
        let total = lengths
            .iter()
            .try_fold(0usize, |acc, &l| acc.checked_add(l.checked_mul(dim)?))
            .ok_or_else(|| Failure::invalid("frame count overflows"))?;
        let frames = slice_arg(frames, total, "frames")?;
        let mut offset = 0;
        let mut sequences = Vec::with_capacity(n);
        for &l in lengths {
            let chunk = &frames[offset..offset + l * dim];
            offset += l * dim;
            sequences.push(EmbeddingSequence::new(dim, chunk.to_vec())?);
        }
        let set = EmbeddingSequenceSet::new(sequences)?;
        put(out, boxed(set));
        Ok(())
    })
}

/// Releases a set. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn srk_sequence_set_free(set: *mut SrkSequenceSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of sequences, or 0 for null.
#[no_mangle]
pub unsafe extern "C" fn srk_sequence_set_len(set: *const SrkSequenceSet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.len())
}

/// Embedding dimension, or 0 for null.
#[no_mangle]
pub unsafe extern "C" fn srk_sequence_set_dim(set: *const SrkSequenceSet) -> usize {
    set.as_ref().map_or(0, |s| s.inner.dim())
}

/// Draws `k` sequences without replacement with the seeded sampler. The
/// chosen positions depend only on `(len, k, seed)`.
#[no_mangle]
pub unsafe extern "C" fn srk_sequence_set_sample(
    set: *const SrkSequenceSet,
    k: usize,
    seed: u64,
    out: *mut *mut SrkSequenceSet,
) -> SrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let sampled = sample_sequences(set_arg(set)?, k, seed)?;
        put(out, boxed(sampled));
        Ok(())
    })
}

/// Effective rank of the set after pooling each sequence to one row.
/// `pooling` is an [`SrkPooling`] value.
#[no_mangle]
pub unsafe extern "C" fn srk_rankme_t(
    set: *const SrkSequenceSet,
    pooling: u32,
    out: *mut SrkRank,
) -> SrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let pooling = match pooling {
            p if p == SrkPooling::Sum as u32 => Pooling::Sum,
            p if p == SrkPooling::Mean as u32 => Pooling::Mean,
            p => return Err(Failure::invalid(format!("unknown pooling {p}"))),
        };
        put(out, rank_out(rankme_t_with(set_arg(set)?, pooling)?));
        Ok(())
    })
}

/// Effective rank of a row-major `rows × cols` matrix.
#[no_mangle]
pub unsafe extern "C" fn srk_rankme(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut SrkRank,
) -> SrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::invalid("matrix size overflows"))?;
        let data = slice_arg(data, len, "data")?;
        let m = EmbeddingMatrix::new(rows, cols, data.to_vec())?;
        put(out, rank_out(rankme(&m)?));
        Ok(())
    })
}

/// Effective rank of a list of singular values, in any order.
#[no_mangle]
pub unsafe extern "C" fn srk_effective_rank(sigmas: *const f64, len: usize, out: *mut SrkRank) -> SrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let mut values = slice_arg(sigmas, len, "sigmas")?.to_vec();
        values.sort_by(|a, b| b.total_cmp(a));
        let s = SingularSpectrum::new(values)?;
        put(out, rank_out(effective_rank(&s)?));
        Ok(())
    })
}

/// Kendall τ-b of `n` paired observations. A constant side is not an error:
/// the result has `has_tau = 0`.
#[no_mangle]
pub unsafe extern "C" fn srk_kendall_tau(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut SrkKendall,
) -> SrkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let r = kendall_tau(slice_arg(x, n, "x")?, slice_arg(y, n, "y")?)?;
        put(
            out,
            SrkKendall {
                tau: r.tau.unwrap_or(f64::NAN),
                p_value: r.p_value.unwrap_or(f64::NAN),
                has_tau: r.tau.is_some() as u8,
                p_method: match r.p_method {
                    PValueMethod::Exact => SrkPMethod::Exact,
                    PValueMethod::Normal => SrkPMethod::Normal,
                    PValueMethod::Undefined => SrkPMethod::Undefined,
                },
                n: r.n_pairs as u64,
                concordant: r.concordant,
                discordant: r.discordant,
                ties_x: r.ties_x,
                ties_y: r.ties_y,
                ties_xy: r.ties_xy,
            },
        );
        Ok(())
    })
}

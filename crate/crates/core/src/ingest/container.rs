//! The RKMT ragged embedding container.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RKMT"
//! 4       4     version (u32) = 1
//! 8       8     n_sequences (u64) >= 1
//! 16      8     dim (u64) >= 1
//! 24      1     dtype (u8): 0 = f32, 1 = f64
//! 25      ...   n_sequences records of
//!                 length (u64) >= 1
//!                 length * dim values, row-major, in dtype
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::IngestError;
use crate::temporal::{EmbeddingSequence, EmbeddingSequenceSet};

pub const MAGIC: [u8; 4] = *b"RKMT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 25;

/// Storage precision of the values in a container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Dtype {
    #[default]
    F32 = 0,
    F64 = 1,
}

impl Dtype {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

impl std::str::FromStr for Dtype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" | "0" => Ok(Dtype::F32),
            "f64" | "1" => Ok(Dtype::F64),
            other => Err(format!("unknown dtype '{other}' (expected f32 or f64)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u32,
    pub n_sequences: u64,
    pub dim: u64,
    pub dtype: Dtype,
}

impl ContainerHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..8].copy_from_slice(&self.version.to_le_bytes());
        b[8..16].copy_from_slice(&self.n_sequences.to_le_bytes());
        b[16..24].copy_from_slice(&self.dim.to_le_bytes());
        b[24] = self.dtype.code();
        b
    }
}

/// Exact size in bytes of the container that [`write_container`] produces.
pub fn container_len(set: &EmbeddingSequenceSet, dtype: Dtype) -> u64 {
    let values = (set.total_frames() * set.dim()) as u64;
    HEADER_LEN + 8 * set.len() as u64 + values * dtype.width() as u64
}

/// Serializes `set`, returning the number of bytes written.
///
/// With [`Dtype::F32`] every value must be representable as a finite f32.
pub fn write_container<W: Write>(
    set: &EmbeddingSequenceSet,
    dtype: Dtype,
    mut out: W,
) -> Result<u64, IngestError> {
    let header = ContainerHeader {
        version: VERSION,
        n_sequences: set.len() as u64,
        dim: set.dim() as u64,
        dtype,
    };
    out.write_all(&header.to_bytes())?;
    let mut written = HEADER_LEN;
    let mut buf = Vec::new();
    for (i, seq) in set.sequences().iter().enumerate() {
        buf.clear();
        buf.extend_from_slice(&(seq.len() as u64).to_le_bytes());
        match dtype {
            Dtype::F32 => {
                for (pos, &v) in seq.as_slice().iter().enumerate() {
                    let narrow = v as f32;
                    if !narrow.is_finite() {
                        return Err(IngestError::OutOfRange {
                            sequence: i,
                            frame: pos / set.dim(),
                            col: pos % set.dim(),
                            value: v,
                        });
                    }
                    buf.extend_from_slice(&narrow.to_le_bytes());
                }
            }
            Dtype::F64 => {
                for v in seq.as_slice() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.write_all(&buf)?;
        written += buf.len() as u64;
    }
    out.flush()?;
    Ok(written)
}

pub fn write_container_file(
    set: &EmbeddingSequenceSet,
    dtype: Dtype,
    path: impl AsRef<Path>,
) -> Result<u64, IngestError> {
    let file = File::create(path.as_ref()).map_err(|e| IngestError::io_at(path.as_ref(), e))?;
    write_container(set, dtype, BufWriter::new(file))
}

/// Byte-counting reader that reports truncation with offsets.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<(), IngestError> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => {
                    return Err(IngestError::Truncated {
                        offset: self.offset,
                        expected: buf.len() as u64,
                        available: got as u64,
                    })
                }
                Ok(n) => got += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    /// Reads exactly `len` bytes without trusting `len` for the allocation.
    fn take_vec(&mut self, len: u64) -> Result<Vec<u8>, IngestError> {
        let mut buf = Vec::with_capacity(len.min(1 << 20) as usize);
        let got = (&mut self.inner).take(len).read_to_end(&mut buf)? as u64;
        if got < len {
            return Err(IngestError::Truncated {
                offset: self.offset,
                expected: len,
                available: got,
            });
        }
        self.offset += len;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, IngestError> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64, IngestError> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
}

fn read_header_from<R: Read>(cur: &mut Cursor<R>) -> Result<ContainerHeader, IngestError> {
    let mut magic = [0u8; 4];
    cur.fill(&mut magic)?;
    if magic != MAGIC {
        return Err(IngestError::BadMagic {
            offset: 0,
            found: magic,
        });
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(IngestError::UnsupportedVersion { offset: 4, version });
    }
    let n_sequences = cur.u64()?;
    let dim = cur.u64()?;
    let mut code = [0u8; 1];
    cur.fill(&mut code)?;
    let dtype = Dtype::from_code(code[0]).ok_or(IngestError::UnsupportedDtype {
        offset: 24,
        code: code[0],
    })?;
    if n_sequences == 0 {
        return Err(IngestError::InvalidHeader {
            offset: 8,
            reason: "n_sequences must be at least 1".into(),
        });
    }
    if dim == 0 {
        return Err(IngestError::InvalidHeader {
            offset: 16,
            reason: "dim must be at least 1".into(),
        });
    }
    Ok(ContainerHeader {
        version,
        n_sequences,
        dim,
        dtype,
    })
}

/// Reads and validates only the 25-byte header.
pub fn read_header<R: Read>(source: R) -> Result<ContainerHeader, IngestError> {
    read_header_from(&mut Cursor {
        inner: source,
        offset: 0,
    })
}

/// Parses a full container. Trailing bytes after the last record are an error.
pub fn read_container<R: Read>(source: R) -> Result<EmbeddingSequenceSet, IngestError> {
    let mut cur = Cursor {
        inner: source,
        offset: 0,
    };
    let header = read_header_from(&mut cur)?;
    let dim = usize::try_from(header.dim).map_err(|_| IngestError::InvalidHeader {
        offset: 16,
        reason: format!("dim {} does not fit in memory", header.dim),
    })?;
    let width = header.dtype.width() as u64;
    let mut sequences = Vec::with_capacity(header.n_sequences.min(1 << 16) as usize);
    for index in 0..header.n_sequences {
        let length_offset = cur.offset;
        let length = cur.u64()?;
        if length == 0 {
            return Err(IngestError::EmptySequence {
                offset: length_offset,
                sequence: index as usize,
            });
        }
        let nbytes = length
            .checked_mul(header.dim)
            .and_then(|v| v.checked_mul(width))
            .ok_or(IngestError::InvalidHeader {
                offset: length_offset,
                reason: format!("sequence {index} length {length} overflows"),
            })?;
        let values_offset = cur.offset;
        let raw = cur.take_vec(nbytes)?;
        let values: Vec<f64> = match header.dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4-byte chunk"))))
                .collect(),
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
        };
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(IngestError::NonFinite {
                offset: values_offset + pos as u64 * width,
                sequence: index as usize,
                frame: pos / dim,
                col: pos % dim,
            });
        }
        sequences.push(EmbeddingSequence::new(dim, values).expect("validated above"));
    }
    let mut probe = [0u8; 1];
    if cur.inner.read(&mut probe)? != 0 {
        return Err(IngestError::TrailingBytes { offset: cur.offset });
    }
    Ok(EmbeddingSequenceSet::new(sequences).expect("header guarantees a nonempty set"))
}

pub fn read_container_file(path: impl AsRef<Path>) -> Result<EmbeddingSequenceSet, IngestError> {
    let file = File::open(path.as_ref()).map_err(|e| IngestError::io_at(path.as_ref(), e))?;
    read_container(BufReader::new(file))
}

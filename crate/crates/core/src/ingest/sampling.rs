//! Deterministic subset sampling.
//!
//! The generator and draw procedure are fixed by the format documentation
//! rather than by a library so every implementation selects the same subset:
//!
//! * SplitMix64 stream seeded with the 64-bit seed.
//! * A draw below `bound` is `(next() as u128 * bound as u128) >> 64`.
//! * Partial Fisher-Yates over `0..n`: for `i` in `0..k`, swap position `i`
//!   with position `i + below(n - i)`; the first `k` positions are the sample.

use super::IngestError;
use crate::temporal::EmbeddingSequenceSet;

/// SplitMix64 (Steele, Lea, Flood 2014).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish draw in `0..bound` by multiply-high. `bound` must be > 0.
    pub fn below(&mut self, bound: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(bound)) >> 64) as u64
    }
}

/// Indices of the `k`-subset of `0..n` selected by `seed`, in selection order.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, IngestError> {
    if k == 0 || k > n {
        return Err(IngestError::SampleRange { k, n });
    }
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    Ok(idx)
}

/// Draws `k` sequences from `set` without replacement.
///
/// The selection depends only on `(set.len(), k, seed)`, so equally sized
/// sets sampled with the same seed pick the same positions.
pub fn sample_sequences(
    set: &EmbeddingSequenceSet,
    k: usize,
    seed: u64,
) -> Result<EmbeddingSequenceSet, IngestError> {
    let idx = sample_indices(set.len(), k, seed)?;
    Ok(set.select(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::EmbeddingSequence;

    #[test]
    fn splitmix_reference_stream() {
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xe220_a839_7b1d_cdaf);
        assert_eq!(r.next_u64(), 0x6e78_9e6a_a1b9_65f4);
        assert_eq!(r.next_u64(), 0x06c4_5d18_8009_454f);
    }

    // Expected values produced by tests/oracles/sample_oracle.py.
    #[test]
    fn matches_reference_sampler() {
        assert_eq!(sample_indices(10, 3, 42).unwrap(), vec![7, 2, 4]);
        assert_eq!(
            sample_indices(10, 10, 42).unwrap(),
            vec![7, 2, 4, 5, 1, 9, 6, 3, 8, 0]
        );
        assert_eq!(sample_indices(1000, 5, 7).unwrap(), vec![389, 17, 900, 584, 454]);
    }

    #[test]
    fn range_errors() {
        assert!(matches!(
            sample_indices(5, 0, 1),
            Err(IngestError::SampleRange { .. })
        ));
        assert!(matches!(
            sample_indices(5, 6, 1),
            Err(IngestError::SampleRange { .. })
        ));
    }

    #[test]
    fn full_sample_is_permutation() {
        let set = EmbeddingSequenceSet::new(
            (0..7)
                .map(|i| EmbeddingSequence::new(1, vec![i as f64; i + 1]).unwrap())
                .collect(),
        )
        .unwrap();
        let s = sample_sequences(&set, 7, 99).unwrap();
        let mut firsts: Vec<f64> = s.sequences().iter().map(|q| q.frame(0)[0]).collect();
        firsts.sort_by(f64::total_cmp);
        assert_eq!(firsts, (0..7).map(f64::from).collect::<Vec<_>>());
        assert_eq!(sample_sequences(&set, 7, 99).unwrap(), s);
    }
}

//! Independent reference implementations and generators shared by the
//! integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use seqrank::temporal::{EmbeddingSequence, EmbeddingSequenceSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    pub ties_x: u64,
    pub ties_y: u64,
    pub ties_xy: u64,
}

/// Classifies every unordered pair by direct enumeration.
pub fn brute_pairs(x: &[f64], y: &[f64]) -> PairCounts {
    let mut c = PairCounts::default();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            match (dx == 0.0, dy == 0.0) {
                (true, true) => c.ties_xy += 1,
                (true, false) => c.ties_x += 1,
                (false, true) => c.ties_y += 1,
                _ if (dx > 0.0) == (dy > 0.0) => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

/// τ-b from pair counts; `None` when either side is constant.
pub fn brute_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let c = brute_pairs(x, y);
    let untied_x = c.concordant + c.discordant + c.ties_y;
    let untied_y = c.concordant + c.discordant + c.ties_x;
    if untied_x == 0 || untied_y == 0 {
        return None;
    }
    let s = c.concordant as f64 - c.discordant as f64;
    Some((s / (untied_x as f64 * untied_y as f64).sqrt()).clamp(-1.0, 1.0))
}

fn s_stat(x: &[f64], y: &[f64]) -> i64 {
    let c = brute_pairs(x, y);
    c.concordant as i64 - c.discordant as i64
}

fn permute(y: &mut Vec<f64>, k: usize, visit: &mut dyn FnMut(&[f64])) {
    if k == y.len() {
        visit(y);
        return;
    }
    for i in k..y.len() {
        y.swap(k, i);
        permute(y, k + 1, visit);
        y.swap(k, i);
    }
}

/// Two-sided permutation p-value over all `n!` orderings of `y`, by
/// recursive transposition enumeration.
pub fn brute_exact_p(x: &[f64], y: &[f64]) -> f64 {
    let target = s_stat(x, y).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    permute(&mut y.to_vec(), 0, &mut |p| {
        total += 1;
        if s_stat(x, p).abs() >= target {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

/// Integer-valued list with deliberate ties: values drawn from `0..levels`.
pub fn tied_list(r: &mut impl Rng, n: usize, levels: i64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(0..levels) as f64).collect()
}

pub fn gaussian(r: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.sample(StandardNormal)).collect()
}

/// Ragged set with Gaussian frames and lengths in `1..=max_len`.
pub fn random_set(r: &mut impl Rng, n: usize, dim: usize, max_len: usize) -> EmbeddingSequenceSet {
    let seqs = (0..n)
        .map(|_| {
            let len = r.random_range(1..=max_len);
            EmbeddingSequence::new(dim, gaussian(r, len * dim)).unwrap()
        })
        .collect();
    EmbeddingSequenceSet::new(seqs).unwrap()
}

/// Sum-pooled rows computed frame by frame in plain index arithmetic.
pub fn naive_pool(set: &EmbeddingSequenceSet) -> Vec<Vec<f64>> {
    set.sequences()
        .iter()
        .map(|s| {
            let mut row = vec![0.0; set.dim()];
            for t in 0..s.len() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v += s.as_slice()[t * set.dim() + c];
                }
            }
            row
        })
        .collect()
}

/// `exp` of the entropy of `σ/‖σ‖₁` over the values above `1e-12·σ_max`.
pub fn naive_effective_rank(sigmas: &[f64]) -> f64 {
    let max = sigmas.iter().copied().fold(0.0, f64::max);
    let kept: Vec<f64> = sigmas.iter().copied().filter(|&s| s >= 1e-12 * max).collect();
    let total: f64 = kept.iter().sum();
    let h: f64 = kept
        .iter()
        .map(|s| s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.exp()
}

/// Random orthogonal `d × d` matrix, row-major, via Gram-Schmidt on
/// Gaussian columns.
pub fn random_orthogonal(r: &mut impl Rng, d: usize) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < d {
        let mut v = gaussian(r, d);
        for _ in 0..2 {
            for q in &cols {
                let p: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, a)| *x -= p * a);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    let mut q = vec![0.0; d * d];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            q[i * d + j] = c[i];
        }
    }
    q
}

/// Right-multiplies every frame of `set` by the `d × d` row-major `q`.
pub fn rotate(set: &EmbeddingSequenceSet, q: &[f64]) -> EmbeddingSequenceSet {
    let d = set.dim();
    let seqs = set
        .sequences()
        .iter()
        .map(|s| {
            let mut out = vec![0.0; s.as_slice().len()];
            for t in 0..s.len() {
                let frame = &s.as_slice()[t * d..(t + 1) * d];
                for j in 0..d {
                    out[t * d + j] = (0..d).map(|k| frame[k] * q[k * d + j]).sum();
                }
            }
            EmbeddingSequence::new(d, out).unwrap()
        })
        .collect();
    EmbeddingSequenceSet::new(seqs).unwrap()
}

pub fn scale_set(set: &EmbeddingSequenceSet, c: f64) -> EmbeddingSequenceSet {
    EmbeddingSequenceSet::new(set.sequences().iter().map(|s| s.scaled(c).unwrap()).collect()).unwrap()
}

//! Kendall's τ-b between ranks and downstream performance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{DownstreamRecord, Orientation};

/// Largest sample size for which p-values come from full permutation
/// enumeration; above it the normal approximation is used.
pub const EXACT_P_MAX_N: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {xs} xs vs {ys} ys")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("need at least 2 observations, got {n}")]
    TooFew { n: usize },
    #[error("non-finite {which} value at index {index}")]
    NonFinite { which: &'static str, index: usize },
}

/// Larger is better, whatever the metric's native direction.
///
/// Lower-is-better metrics are negated, a linear and strictly decreasing map,
/// so correlations against the oriented value equal correlations against the
/// reversed raw metric.
pub fn orient(record: &DownstreamRecord) -> f64 {
    match record.orientation {
        Orientation::HigherIsBetter => record.metric_value,
        Orientation::LowerIsBetter => -record.metric_value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    /// Fraction of all `n!` permutations of `ys` with `|S| ≥ |S_obs|`.
    Exact,
    /// Two-sided normal approximation with tie-adjusted variance of `S`.
    Normal,
    /// τ undefined (all `xs` or all `ys` tied).
    Undefined,
}

/// τ-b together with the pair counts it was computed from.
///
/// Every unordered pair of observations falls into exactly one of the five
/// count fields. `tau` and `p_value` are `None` when one side is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub tau: Option<f64>,
    pub p_value: Option<f64>,
    pub p_method: PValueMethod,
    pub n_pairs: usize,
    pub concordant: u64,
    pub discordant: u64,
    /// Pairs tied in x only.
    pub ties_x: u64,
    /// Pairs tied in y only.
    pub ties_y: u64,
    /// Pairs tied in both.
    pub ties_xy: u64,
}

impl CorrelationResult {
    pub fn is_degenerate(&self) -> bool {
        self.tau.is_none()
    }

    /// `S = concordant − discordant`.
    pub fn s_statistic(&self) -> i64 {
        self.concordant as i64 - self.discordant as i64
    }
}

fn choose2(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Sizes of runs of equal values in a sorted slice.
fn tie_runs(sorted: &[f64]) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            runs.push((j - i) as u64);
        }
        i = j;
    }
    runs
}

/// Sorts `v` ascending and returns the number of strictly inverted pairs.
fn merge_sort_inversions(v: &mut [f64], scratch: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = merge_sort_inversions(&mut v[..mid], &mut scratch[..mid])
        + merge_sort_inversions(&mut v[mid..], &mut scratch[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            scratch[k] = v[j];
            inv += (mid - i) as u64;
            j += 1;
        } else {
            scratch[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&scratch[..n]);
    inv
}

struct Counts {
    concordant: u64,
    discordant: u64,
    ties_x: u64,
    ties_y: u64,
    ties_xy: u64,
    x_runs: Vec<u64>,
    y_runs: Vec<u64>,
}

/// O(n log n) pair classification (Knight's method): sort by (x, y), count
/// joint and x ties, then count discordant pairs as inversions of the y
/// sequence during a merge sort.
fn classify_pairs(xs: &[f64], ys: &[f64]) -> Counts {
    let n = xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(&x, &y)| (x, y)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let sorted_x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_runs = tie_runs(&sorted_x);
    let tied_x: u64 = x_runs.iter().map(|&t| choose2(t)).sum();

    let mut tied_xy = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j] == pairs[i] {
            j += 1;
        }
        tied_xy += choose2((j - i) as u64);
        i = j;
    }

    let mut y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = vec![0.0; y.len()];
    let discordant = merge_sort_inversions(&mut y, &mut scratch);
    let y_runs = tie_runs(&y);
    let tied_y: u64 = y_runs.iter().map(|&t| choose2(t)).sum();

    let concordant = choose2(n) + tied_xy - tied_x - tied_y - discordant;
    Counts {
        concordant,
        discordant,
        ties_x: tied_x - tied_xy,
        ties_y: tied_y - tied_xy,
        ties_xy: tied_xy,
        x_runs,
        y_runs,
    }
}

fn validate(xs: &[f64], ys: &[f64]) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFew { n: xs.len() });
    }
    for (which, v) in [("x", xs), ("y", ys)] {
        if let Some(index) = v.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite { which, index });
        }
    }
    // `+ 0.0` folds -0.0 into 0.0 so the two compare as a tie under total_cmp.
    let norm = |v: &[f64]| v.iter().map(|x| x + 0.0).collect::<Vec<_>>();
    Ok((norm(xs), norm(ys)))
}

/// Kendall's τ-b with tie correction and a two-sided p-value.
///
/// For `n ≤ 8` the p-value is exact over all `n!` permutations of `ys`;
/// above that it uses the normal approximation to `S` with the
/// tie-adjusted variance. When every `x` or every `y` is equal the result is
/// degenerate (`tau = None`).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, StatsError> {
    let (xs, ys) = validate(xs, ys)?;
    let n = xs.len();
    let c = classify_pairs(&xs, &ys);
    let total = choose2(n as u64);
    let tied_x = c.ties_x + c.ties_xy;
    let tied_y = c.ties_y + c.ties_xy;

    let mut result = CorrelationResult {
        tau: None,
        p_value: None,
        p_method: PValueMethod::Undefined,
        n_pairs: n,
        concordant: c.concordant,
        discordant: c.discordant,
        ties_x: c.ties_x,
        ties_y: c.ties_y,
        ties_xy: c.ties_xy,
    };
    if tied_x == total || tied_y == total {
        return Ok(result);
    }
    let s = c.concordant as f64 - c.discordant as f64;
    let denom = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    result.tau = Some((s / denom).clamp(-1.0, 1.0));

    if n <= EXACT_P_MAX_N {
        result.p_value = Some(exact_p_value(&xs, &ys, result.s_statistic()));
        result.p_method = PValueMethod::Exact;
    } else {
        result.p_value = Some(normal_p_value(n as u64, s, &c.x_runs, &c.y_runs));
        result.p_method = PValueMethod::Normal;
    }
    Ok(result)
}

fn sign(a: f64, b: f64) -> i64 {
    match a.partial_cmp(&b) {
        Some(std::cmp::Ordering::Greater) => 1,
        Some(std::cmp::Ordering::Less) => -1,
        _ => 0,
    }
}

/// Two-sided permutation p-value, enumerating every ordering of `ys` with
/// Heap's algorithm.
fn exact_p_value(xs: &[f64], ys: &[f64], s_obs: i64) -> f64 {
    let n = xs.len();
    let sx: Vec<i64> = (0..n * n).map(|k| sign(xs[k / n], xs[k % n])).collect();
    let s_of = |perm: &[f64]| -> i64 {
        let mut s = 0;
        for i in 0..n {
            for j in i + 1..n {
                s += sx[i * n + j] * sign(perm[i], perm[j]);
            }
        }
        s
    };
    let target = s_obs.abs();
    let mut perm = ys.to_vec();
    let mut counters = vec![0usize; n];
    let mut hits: u64 = u64::from(s_of(&perm).abs() >= target);
    let mut total: u64 = 1;
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            total += 1;
            hits += u64::from(s_of(&perm).abs() >= target);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

/// Variance of `S` under independence with tie corrections.
pub fn s_variance(n: u64, x_runs: &[u64], y_runs: &[u64]) -> f64 {
    let nf = n as f64;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let term = |runs: &[u64]| -> f64 {
        runs.iter()
            .map(|&t| {
                let t = t as f64;
                t * (t - 1.0) * (2.0 * t + 5.0)
            })
            .sum()
    };
    let pairs = |runs: &[u64]| -> f64 { runs.iter().map(|&t| (t * (t - 1)) as f64).sum() };
    let triples = |runs: &[u64]| -> f64 {
        runs.iter()
            .map(|&t| {
                let t = t as f64;
                t * (t - 1.0) * (t - 2.0)
            })
            .sum()
    };
    let v1 = pairs(x_runs) * pairs(y_runs) / (2.0 * nf * (nf - 1.0));
    let v2 = if n > 2 {
        triples(x_runs) * triples(y_runs) / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
    } else {
        0.0
    };
    (v0 - term(x_runs) - term(y_runs)) / 18.0 + v1 + v2
}

fn normal_p_value(n: u64, s: f64, x_runs: &[u64], y_runs: &[u64]) -> f64 {
    let var = s_variance(n, x_runs, y_runs);
    if var <= 0.0 {
        return 1.0;
    }
    let z = s / var.sqrt();
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// A joined (rank, oriented performance) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub run_id: String,
    pub step: u64,
    pub layer: u32,
    pub task: String,
    pub rank: f64,
    pub metric_value: f64,
    /// `metric_value` after [`orient`].
    pub performance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    PerLayer,
    Pooled,
    PerTask,
    PerLayerAndTask,
}

impl Grouping {
    pub fn key_for(self, obs: &Observation) -> GroupKey {
        let (layer, task) = match self {
            Grouping::PerLayer => (Some(obs.layer), None),
            Grouping::Pooled => (None, None),
            Grouping::PerTask => (None, Some(obs.task.clone())),
            Grouping::PerLayerAndTask => (Some(obs.layer), Some(obs.task.clone())),
        };
        GroupKey { layer, task }
    }
}

impl std::str::FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "layer" | "per_layer" => Ok(Grouping::PerLayer),
            "pooled" => Ok(Grouping::Pooled),
            "task" | "per_task" => Ok(Grouping::PerTask),
            "layer_task" | "per_layer_and_task" => Ok(Grouping::PerLayerAndTask),
            other => Err(format!("unknown grouping '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub layer: Option<u32>,
    pub task: Option<String>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.layer, &self.task) {
            (None, None) => f.write_str("pooled"),
            (Some(l), None) => write!(f, "layer={l}"),
            (None, Some(t)) => write!(f, "task={t}"),
            (Some(l), Some(t)) => write!(f, "layer={l}/task={t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCorrelation {
    pub key: GroupKey,
    pub result: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupedCorrelations {
    /// Groups with at least two observations, ordered by key.
    pub groups: Vec<GroupCorrelation>,
    /// Groups too small for a correlation, with their sizes.
    pub insufficient: Vec<(GroupKey, usize)>,
}

/// Correlates rank with oriented performance inside each group.
pub fn tau_by_group(observations: &[Observation], grouping: Grouping) -> GroupedCorrelations {
    let mut buckets: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for o in observations {
        let (xs, ys) = buckets.entry(grouping.key_for(o)).or_default();
        xs.push(o.rank);
        ys.push(o.performance);
    }
    let mut out = GroupedCorrelations::default();
    for (key, (xs, ys)) in buckets {
        match kendall_tau(&xs, &ys) {
            Ok(result) => out.groups.push(GroupCorrelation { key, result }),
            Err(_) => out.insufficient.push((key, xs.len())),
        }
    }
    out
}

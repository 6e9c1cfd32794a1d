//! Embedding sets with planted singular spectra, and synthetic training runs
//! whose effective ranks are known in advance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    write_container_file, write_metrics, DownstreamRecord, Dtype, IngestError, Orientation, SplitMix64,
};
use crate::monitor::{default_container_path, MonitorError, RunManifest};
use crate::spectral::{effective_rank, EmbeddingMatrix, SingularSpectrum};
use crate::temporal::{EmbeddingSequence, EmbeddingSequenceSet, Pooling};

/// File names written by [`plant_run`] into the run root.
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const PLANNED_RANKS_FILE: &str = "planned_ranks.csv";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid plan: {reason}")]
    InvalidPlan { reason: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid<T>(reason: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::InvalidPlan {
        reason: reason.into(),
    })
}

/// Frame counts per sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LengthLaw {
    Constant {
        length: usize,
    },
    /// Uniform over `min..=max`.
    Uniform {
        min: usize,
        max: usize,
    },
}

impl Default for LengthLaw {
    fn default() -> Self {
        LengthLaw::Constant { length: 1 }
    }
}

impl LengthLaw {
    fn validate(&self) -> Result<(), SynthError> {
        match *self {
            LengthLaw::Constant { length: 0 } => invalid("constant length must be at least 1"),
            LengthLaw::Uniform { min, max } if min == 0 || min > max => invalid(format!(
                "uniform lengths need 1 <= min <= max, got [{min}, {max}]"
            )),
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        match *self {
            LengthLaw::Constant { length } => length,
            LengthLaw::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPlan {
    /// Nonincreasing, nonnegative, at most `min(n, d)` values, the first positive.
    pub target_sigmas: Vec<f64>,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub length_law: LengthLaw,
    pub seed: u64,
}

impl SpectrumPlan {
    pub fn validate(&self) -> Result<(), SynthError> {
        let r = self.target_sigmas.len();
        if self.n == 0 || self.d == 0 {
            return invalid(format!("n and d must be positive, got {}x{}", self.n, self.d));
        }
        if r == 0 {
            return invalid("target_sigmas is empty");
        }
        if r > self.n.min(self.d) {
            return invalid(format!(
                "{r} planted values exceed min(n, d) = {}",
                self.n.min(self.d)
            ));
        }
        if self.target_sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return invalid("target_sigmas must be finite and nonnegative");
        }
        if self.target_sigmas.windows(2).any(|w| w[1] > w[0]) {
            return invalid("target_sigmas must be nonincreasing");
        }
        if self.target_sigmas[0] == 0.0 {
            return invalid("target_sigmas are all zero");
        }
        self.length_law.validate()
    }

    /// Effective rank of the target spectrum.
    pub fn planned_rank(&self) -> Result<f64, SynthError> {
        self.validate()?;
        let s = SingularSpectrum::new(self.target_sigmas.clone()).expect("validated spectrum");
        Ok(effective_rank(&s).expect("positive spectrum").value)
    }
}

/// `count` columns of length `len` with orthonormal columns, column-major.
fn orthonormal_columns(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(count);
    while cols.len() < count {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let start: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // two modified Gram-Schmidt passes
        for _ in 0..2 {
            for q in &cols {
                let proj: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, a)| *x -= proj * a);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a draw lying almost inside the current span is redrawn
        if norm <= 1e-8 * start || norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    cols
}

/// `U·diag(σ)·Vᵀ` with seeded random orthonormal `U` (n×r) and `V` (d×r).
pub fn plant_matrix(plan: &SpectrumPlan) -> Result<EmbeddingMatrix, SynthError> {
    plan.validate()?;
    let (n, d) = (plan.n, plan.d);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let u = orthonormal_columns(&mut rng, n, plan.target_sigmas.len());
    let v = orthonormal_columns(&mut rng, d, plan.target_sigmas.len());
    let mut data = vec![0.0; n * d];
    for (k, &sigma) in plan.target_sigmas.iter().enumerate() {
        for i in 0..n {
            let a = sigma * u[k][i];
            let row = &mut data[i * d..(i + 1) * d];
            row.iter_mut().zip(&v[k]).for_each(|(z, b)| *z += a * b);
        }
    }
    Ok(EmbeddingMatrix::new(n, d, data).expect("finite planted matrix"))
}

/// Splits each row of [`plant_matrix`] across a random number of frames.
///
/// Frame `t` of sequence `i` is `w_t · z_i`, where the shares `w_t` are
/// positive and the last is `1 − Σ` of the others, so the sequence sums back
/// to `z_i` up to rounding.
pub fn plant_sequences(plan: &SpectrumPlan) -> Result<EmbeddingSequenceSet, SynthError> {
    let z = plant_matrix(plan)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SplitMix64::new(plan.seed).next_u64());
    let sequences = (0..plan.n)
        .map(|i| {
            let len = plan.length_law.draw(&mut rng);
            let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.25..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut shares: Vec<f64> = raw[..len - 1].iter().map(|w| w / total).collect();
            shares.push(1.0 - shares.iter().sum::<f64>());
            let row = z.row(i);
            let frames = shares
                .iter()
                .flat_map(|w| row.iter().map(move |x| w * x))
                .collect();
            EmbeddingSequence::new(plan.d, frames).expect("finite frames")
        })
        .collect();
    Ok(EmbeddingSequenceSet::new(sequences).expect("consistent dims"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerPlan {
    pub layer: u32,
    /// Added to every step's decay rate for this layer; larger means lower rank.
    #[serde(default)]
    pub decay_offset: f64,
    /// Per-task intercept of the oriented metric.
    #[serde(default)]
    pub metric_base: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPlan {
    pub name: String,
    pub orientation: Orientation,
    /// Oriented metric gained per unit of planned rank.
    #[serde(default = "default_slope")]
    pub slope: f64,
}

fn default_slope() -> f64 {
    0.01
}

fn default_dtype() -> Dtype {
    Dtype::F64
}

/// A synthetic training run.
///
/// Cell (step `i`, layer `l`) plants `rank` singular values
/// `σ_j = exp(−(step_decays[i] + l.decay_offset)·j)`, `j = 0..rank`, so a
/// decreasing `step_decays` makes every layer's spectrum flatten and its
/// effective rank grow over training. Each task's oriented metric is
/// `metric_base[task] + slope · planned_rank`; lower-is-better tasks store
/// `1 − oriented`.
///
/// ```toml
/// run_id = "toy"
/// n = 200
/// d = 32
/// rank = 24
/// seed = 7
/// steps = [1000, 2000, 3000]
/// step_decays = [0.6, 0.4, 0.2]
/// length_law = { kind = "uniform", min = 1, max = 5 }
///
/// [[layers]]
/// layer = 0
///
/// [[layers]]
/// layer = 3
/// decay_offset = 0.1
/// metric_base = { PR = 0.2 }
///
/// [[tasks]]
/// name = "PR"
/// orientation = "lower"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPlan {
    pub run_id: String,
    pub n: usize,
    pub d: usize,
    pub rank: usize,
    pub seed: u64,
    /// Defaults to `n`, in which case scanned ranks reproduce the plan.
    #[serde(default)]
    pub sample_k: Option<usize>,
    #[serde(default)]
    pub sample_seed: u64,
    /// Container precision. f32 storage perturbs ranks by about 1e-7.
    #[serde(default = "default_dtype")]
    pub dtype: Dtype,
    pub steps: Vec<u64>,
    pub step_decays: Vec<f64>,
    #[serde(default)]
    pub length_law: LengthLaw,
    pub layers: Vec<LayerPlan>,
    #[serde(default)]
    pub tasks: Vec<TaskPlan>,
    #[serde(default)]
    pub hyper_params: BTreeMap<String, String>,
}

/// One row of the planned-rank sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedRank {
    pub step: u64,
    pub layer: u32,
    pub planned_rank: f64,
}

impl TrajectoryPlan {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let plan: Self = toml::from_str(text).map_err(|e| SynthError::InvalidPlan {
            reason: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.run_id.is_empty() {
            return invalid("run_id must be nonempty");
        }
        if self.steps.is_empty() || self.steps.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("steps must be nonempty and strictly increasing");
        }
        if self.step_decays.len() != self.steps.len() {
            return invalid(format!(
                "{} step_decays for {} steps",
                self.step_decays.len(),
                self.steps.len()
            ));
        }
        if self.layers.is_empty() || self.layers.windows(2).any(|w| w[0].layer >= w[1].layer) {
            return invalid("layers must be nonempty and strictly increasing");
        }
        if self.rank == 0 || self.rank > self.n.min(self.d) {
            return invalid(format!("rank must be in 1..=min(n, d), got {}", self.rank));
        }
        if matches!(self.sample_k, Some(k) if k == 0 || k > self.n) {
            return invalid("sample_k must be in 1..=n");
        }
        for decay in &self.step_decays {
            for l in &self.layers {
                let rate = decay + l.decay_offset;
                if !rate.is_finite() || rate < 0.0 {
                    return invalid(format!("layer {} has decay rate {rate}", l.layer));
                }
            }
        }
        for t in &self.tasks {
            if t.name.is_empty() || t.name.contains([',', '"', '\n']) {
                return invalid(format!("task name {:?} is not a plain CSV field", t.name));
            }
            if !t.slope.is_finite() {
                return invalid(format!("task {} slope is not finite", t.name));
            }
        }
        self.length_law.validate()
    }

    pub fn sigmas(&self, step_index: usize, layer: &LayerPlan) -> Vec<f64> {
        let rate = self.step_decays[step_index] + layer.decay_offset;
        (0..self.rank).map(|j| (-rate * j as f64).exp()).collect()
    }

    fn cell_seed(&self, step: u64, layer: u32) -> u64 {
        let mut m = SplitMix64::new(self.seed);
        let a = m.next_u64();
        SplitMix64::new(a ^ step ^ (u64::from(layer) << 48).rotate_left(7)).next_u64()
    }

    pub fn spectrum_plan(&self, step_index: usize, layer: &LayerPlan) -> SpectrumPlan {
        SpectrumPlan {
            target_sigmas: self.sigmas(step_index, layer),
            n: self.n,
            d: self.d,
            length_law: self.length_law,
            seed: self.cell_seed(self.steps[step_index], layer.layer),
        }
    }

    /// Planned effective rank of every cell, ordered by (step, layer).
    pub fn planned_ranks(&self) -> Result<Vec<PlannedRank>, SynthError> {
        let mut out = Vec::new();
        for (i, &step) in self.steps.iter().enumerate() {
            for l in &self.layers {
                out.push(PlannedRank {
                    step,
                    layer: l.layer,
                    planned_rank: self.spectrum_plan(i, l).planned_rank()?,
                });
            }
        }
        Ok(out)
    }

    /// The metric table implied by the planned ranks.
    pub fn metrics(&self, planned: &[PlannedRank]) -> Vec<DownstreamRecord> {
        let mut out = Vec::new();
        for p in planned {
            let layer = self
                .layers
                .iter()
                .find(|l| l.layer == p.layer)
                .expect("planned layer");
            for t in &self.tasks {
                let oriented =
                    layer.metric_base.get(&t.name).copied().unwrap_or(0.0) + t.slope * p.planned_rank;
                let metric_value = match t.orientation {
                    Orientation::HigherIsBetter => oriented,
                    Orientation::LowerIsBetter => 1.0 - oriented,
                };
                out.push(DownstreamRecord {
                    run_id: self.run_id.clone(),
                    step: p.step,
                    layer: p.layer,
                    task: t.name.clone(),
                    metric_value,
                    orientation: t.orientation,
                });
            }
        }
        out
    }
}

pub fn write_planned_ranks(path: impl AsRef<Path>, planned: &[PlannedRank]) -> Result<(), SynthError> {
    let mut body = String::from("step,layer,planned_rank\n");
    for p in planned {
        let _ = writeln!(body, "{},{},{}", p.step, p.layer, p.planned_rank);
    }
    let path = path.as_ref();
    std::fs::write(path, body).map_err(|source| SynthError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_planned_ranks(path: impl AsRef<Path>) -> Result<Vec<PlannedRank>, SynthError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| SynthError::InvalidPlan {
        reason: format!("{}: {e}", path.display()),
    })?;
    reader
        .deserialize()
        .collect::<Result<Vec<PlannedRank>, _>>()
        .map_err(|e| SynthError::InvalidPlan {
            reason: format!("{}: {e}", path.display()),
        })
}

/// Writes a synthetic run under `root` and returns its manifest.
///
/// `root` receives `step-<s>/layer-<l>.rkmt` containers, `manifest.toml`
/// (with `root = "."`), `planned_ranks.csv` and, when the plan has tasks,
/// `metrics.csv`. Output bytes depend only on the plan.
pub fn plant_run(plan: &TrajectoryPlan, root: impl AsRef<Path>) -> Result<RunManifest, SynthError> {
    plan.validate()?;
    let root = root.as_ref();
    let mkdir = |p: &Path| {
        std::fs::create_dir_all(p).map_err(|source| SynthError::File {
            path: p.to_path_buf(),
            source,
        })
    };
    mkdir(root)?;
    for &step in &plan.steps {
        mkdir(&root.join(format!("step-{step}")))?;
    }

    let cells: Vec<(usize, &LayerPlan)> = (0..plan.steps.len())
        .flat_map(|i| plan.layers.iter().map(move |l| (i, l)))
        .collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(cells.len());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let failures = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let c = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&(i, layer)) = cells.get(c) else { break };
                let written = plant_sequences(&plan.spectrum_plan(i, layer)).and_then(|set| {
                    let path = default_container_path(root, plan.steps[i], layer.layer);
                    write_container_file(&set, plan.dtype, path).map_err(SynthError::from)
                });
                if let Err(e) = written {
                    failures.lock().expect("lock").push((c, e));
                }
            });
        }
    });
    let mut failures = failures.into_inner().expect("workers joined");
    failures.sort_by_key(|(c, _)| *c);
    if let Some((_, e)) = failures.into_iter().next() {
        return Err(e);
    }

    let planned = plan.planned_ranks()?;
    write_planned_ranks(root.join(PLANNED_RANKS_FILE), &planned)?;
    if !plan.tasks.is_empty() {
        let path = root.join(METRICS_FILE);
        let file = std::fs::File::create(&path).map_err(|source| SynthError::File {
            path: path.clone(),
            source,
        })?;
        write_metrics(&plan.metrics(&planned), std::io::BufWriter::new(file))?;
    }

    let mut manifest = RunManifest {
        run_id: plan.run_id.clone(),
        root: PathBuf::from("."),
        layers: plan.layers.iter().map(|l| l.layer).collect(),
        steps: plan.steps.clone(),
        sample_k: plan.sample_k.unwrap_or(plan.n),
        sample_seed: plan.sample_seed,
        pooling: Pooling::Sum,
        history: None,
        hyper_params: plan.hyper_params.clone(),
        paths: BTreeMap::new(),
    };
    manifest.save(root.join(MANIFEST_FILE))?;
    manifest.root = root.to_path_buf();
    Ok(manifest)
}

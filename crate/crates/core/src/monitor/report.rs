//! Joining ranks with downstream metrics, and the report documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::history::{latest, RankRecord};
use super::MonitorError;
use crate::ingest::DownstreamRecord;
use crate::stats::{orient, tau_by_group, CorrelationResult, Grouping, Observation, PValueMethod};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Significant digits kept for every float in emitted documents.
pub const REPORT_SIG_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub layer: Option<u32>,
    pub task: Option<String>,
    pub n: usize,
    pub tau: Option<f64>,
    pub p_value: Option<f64>,
    pub p_method: PValueMethod,
    pub concordant: u64,
    pub discordant: u64,
    pub ties_x: u64,
    pub ties_y: u64,
    pub ties_xy: u64,
}

impl GroupRow {
    fn new(group: String, layer: Option<u32>, task: Option<String>, r: &CorrelationResult) -> Self {
        Self {
            group,
            layer,
            task,
            n: r.n_pairs,
            tau: r.tau,
            p_value: r.p_value,
            p_method: r.p_method,
            concordant: r.concordant,
            discordant: r.discordant,
            ties_x: r.ties_x,
            ties_y: r.ties_y,
            ties_xy: r.ties_xy,
        }
    }
}

/// For one task: the layer with the best mean oriented metric next to the
/// layer with the highest mean rank, over that task's joined observations.
/// The two are computed independently and are expected to disagree at times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestLayerRow {
    pub task: String,
    pub best_layer_by_metric: u32,
    pub best_metric_mean: f64,
    pub best_layer_by_rank: u32,
    pub best_rank_mean: f64,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsufficientGroup {
    pub group: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub joined_observations: usize,
    /// Groups with fewer than two observations, left out of `groups`.
    pub insufficient_groups: Vec<InsufficientGroup>,
    /// Groups where every rank or every metric is tied (τ undefined).
    pub degenerate_groups: Vec<String>,
    /// `run/step/layer` keys present in the metrics but not in the ranks.
    pub unmatched_metric_keys: Vec<String>,
    /// `run/step/layer` keys present in the ranks but not in the metrics.
    pub unmatched_rank_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub schema_version: u32,
    pub grouping: Grouping,
    pub groups: Vec<GroupRow>,
    pub best_layers: Vec<BestLayerRow>,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub observations: Vec<Observation>,
}

fn cell_key(run: &str, step: u64, layer: u32) -> String {
    format!("{run}/{step}/{layer}")
}

/// Inner join on (run, step, layer) after latest-wins deduplication of the
/// ranks. Returns the observations and the unmatched keys on both sides.
pub fn join(
    ranks: &[RankRecord],
    metrics: &[DownstreamRecord],
) -> (Vec<Observation>, Vec<String>, Vec<String>) {
    let ranks = latest(ranks);
    let by_cell: BTreeMap<(&str, u64, u32), &RankRecord> = ranks.iter().map(|r| (r.key(), r)).collect();
    let mut used = BTreeSet::new();
    let mut unmatched_metrics = BTreeSet::new();
    let mut obs = Vec::new();
    for m in metrics {
        let key = (m.run_id.as_str(), m.step, m.layer);
        match by_cell.get(&key) {
            Some(r) => {
                used.insert(key);
                obs.push(Observation {
                    run_id: m.run_id.clone(),
                    step: m.step,
                    layer: m.layer,
                    task: m.task.clone(),
                    rank: r.rank_value,
                    metric_value: m.metric_value,
                    performance: orient(m),
                });
            }
            None => {
                unmatched_metrics.insert(cell_key(&m.run_id, m.step, m.layer));
            }
        }
    }
    let unmatched_ranks = by_cell
        .keys()
        .filter(|k| !used.contains(*k))
        .map(|&(r, s, l)| cell_key(r, s, l))
        .collect();
    (obs, unmatched_metrics.into_iter().collect(), unmatched_ranks)
}

/// Per-layer running `(sum, count)`.
type LayerSums = BTreeMap<u32, (f64, usize)>;

fn argmax_mean(values: &LayerSums) -> (u32, f64) {
    let mut best: Option<(u32, f64)> = None;
    for (&layer, &(sum, count)) in values {
        let mean = sum / count as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((layer, mean));
        }
    }
    best.expect("at least one layer")
}

fn best_layers(obs: &[Observation]) -> Vec<BestLayerRow> {
    let mut per_task: BTreeMap<&str, (LayerSums, LayerSums)> = BTreeMap::new();
    for o in obs {
        let (metric, rank) = per_task.entry(&o.task).or_default();
        let m = metric.entry(o.layer).or_default();
        m.0 += o.performance;
        m.1 += 1;
        let r = rank.entry(o.layer).or_default();
        r.0 += o.rank;
        r.1 += 1;
    }
    per_task
        .into_iter()
        .map(|(task, (metric, rank))| {
            let (best_layer_by_metric, best_metric_mean) = argmax_mean(&metric);
            let (best_layer_by_rank, best_rank_mean) = argmax_mean(&rank);
            BestLayerRow {
                task: task.to_string(),
                best_layer_by_metric,
                best_metric_mean,
                best_layer_by_rank,
                best_rank_mean,
                agree: best_layer_by_metric == best_layer_by_rank,
            }
        })
        .collect()
}

/// Joins ranks with oriented metrics and correlates them per group.
pub fn correlate_run(
    ranks: &[RankRecord],
    metrics: &[DownstreamRecord],
    grouping: Grouping,
) -> Result<CorrelationReport, MonitorError> {
    let (observations, unmatched_metric_keys, unmatched_rank_keys) = join(ranks, metrics);
    if observations.is_empty() {
        return Err(MonitorError::EmptyJoin {
            unmatched_metric_keys,
            unmatched_rank_keys,
        });
    }
    let grouped = tau_by_group(&observations, grouping);
    let groups: Vec<GroupRow> = grouped
        .groups
        .iter()
        .map(|g| GroupRow::new(g.key.to_string(), g.key.layer, g.key.task.clone(), &g.result))
        .collect();
    let diagnostics = Diagnostics {
        joined_observations: observations.len(),
        insufficient_groups: grouped
            .insufficient
            .iter()
            .map(|(k, n)| InsufficientGroup {
                group: k.to_string(),
                n: *n,
            })
            .collect(),
        degenerate_groups: groups
            .iter()
            .filter(|g| g.tau.is_none())
            .map(|g| g.group.clone())
            .collect(),
        unmatched_metric_keys,
        unmatched_rank_keys,
    };
    Ok(CorrelationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        grouping,
        groups,
        best_layers: best_layers(&observations),
        diagnostics,
        observations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format '{other}' (expected json or csv)")),
        }
    }
}

/// Rounds to [`REPORT_SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", REPORT_SIG_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

fn round_floats(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *n = serde_json::Number::from_f64(round_sig(x)).expect("finite");
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_floats),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| round_sig(x).to_string()).unwrap_or_default()
}

/// Renders the report. JSON keys are sorted and floats carry at most nine
/// significant digits; the CSV form has one row per group with the header
/// `group,tau,p_value,n`. Output is a pure function of the report.
pub fn emit_report(report: &CorrelationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_value(report).expect("report serializes");
            round_floats(&mut v);
            let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("group,tau,p_value,n\n");
            for g in &report.groups {
                let _ = writeln!(s, "{},{},{},{}", g.group, fmt_opt(g.tau), fmt_opt(g.p_value), g.n);
            }
            s
        }
    }
}

fn file_token(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Plot-data file for the rank-vs-step series of one layer.
pub fn rank_series_file(layer: u32) -> String {
    format!("rank_vs_step_layer-{layer}.csv")
}

/// Plot-data file for the performance-vs-rank scatter of one (task, layer).
pub fn scatter_file(task: &str, layer: u32) -> String {
    format!("perf_vs_rank_{}_layer-{layer}.csv", file_token(task))
}

fn write_file(path: &Path, body: &str) -> Result<(), MonitorError> {
    std::fs::write(path, body).map_err(|e| MonitorError::file(path, e))
}

/// Writes the plot-data CSVs into `dir` and returns their paths in the
/// order written.
///
/// * `rank_vs_step_layer-<L>.csv` (`run_id,step,rank_value`), one per layer
///   in `ranks`, using the latest record per cell.
/// * `perf_vs_rank_<task>_layer-<L>.csv`
///   (`run_id,step,rank_value,metric_value,performance`), one per (task,
///   layer) in `observations`.
pub fn write_plot_data(
    dir: &Path,
    ranks: &[RankRecord],
    observations: &[Observation],
) -> Result<Vec<PathBuf>, MonitorError> {
    std::fs::create_dir_all(dir).map_err(|e| MonitorError::file(dir, e))?;
    let mut written = Vec::new();

    let mut series: BTreeMap<u32, Vec<RankRecord>> = BTreeMap::new();
    for r in latest(ranks) {
        series.entry(r.layer).or_default().push(r);
    }
    for (layer, mut rows) in series {
        rows.sort_by(|a, b| (a.run_id.as_str(), a.step).cmp(&(b.run_id.as_str(), b.step)));
        let mut body = String::from("run_id,step,rank_value\n");
        for r in rows {
            let _ = writeln!(body, "{},{},{}", r.run_id, r.step, round_sig(r.rank_value));
        }
        let path = dir.join(rank_series_file(layer));
        write_file(&path, &body)?;
        written.push(path);
    }

    let mut scatter: BTreeMap<(&str, u32), Vec<&Observation>> = BTreeMap::new();
    for o in observations {
        scatter.entry((&o.task, o.layer)).or_default().push(o);
    }
    for ((task, layer), mut rows) in scatter {
        rows.sort_by(|a, b| (a.run_id.as_str(), a.step).cmp(&(b.run_id.as_str(), b.step)));
        let mut body = String::from("run_id,step,rank_value,metric_value,performance\n");
        for o in rows {
            let _ = writeln!(
                body,
                "{},{},{},{},{}",
                o.run_id,
                o.step,
                round_sig(o.rank),
                round_sig(o.metric_value),
                round_sig(o.performance)
            );
        }
        let path = dir.join(scatter_file(task, layer));
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use seqrank::ingest::{read_container_file, read_metrics_file, sample_sequences};
use seqrank::monitor::{
    correlate_run, emit_report, join, read_history, scan_run, write_plot_data, MonitorError, ReportFormat,
    RunManifest, ScanOptions,
};
use seqrank::spectral::SpectrumMethod;
use seqrank::stats::Grouping;
use seqrank::synth::{plant_run, TrajectoryPlan, MANIFEST_FILE, METRICS_FILE, PLANNED_RANKS_FILE};
use seqrank::temporal::{pool, Pooling};
use seqrank::{Error, Result};

/// Effective-rank monitoring for sequence-embedding checkpoints.
#[derive(Debug, Parser)]
#[command(name = "seqrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Effective rank of one container's pooled sequences.
    Rank {
        #[arg(long)]
        input: PathBuf,
        /// Number of sequences to draw; all of them when omitted.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sum")]
        pool: Pooling,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    /// Measure every (step, layer) cell of a run and append to its history.
    Scan {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Correlate a rank history with downstream metrics.
    Correlate {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "layer")]
        group: Grouping,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also write plot-data CSVs into this directory.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Write a synthetic run from a trajectory plan.
    Synth {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write plot-data CSVs from a rank history.
    Report {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        plots: PathBuf,
        /// Adds performance-vs-rank files for the joined observations.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Svd,
    Gram,
}

impl From<Method> for SpectrumMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => SpectrumMethod::Auto,
            Method::Svd => SpectrumMethod::Svd,
            Method::Gram => SpectrumMethod::Gram,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

/// Stdout is built up in memory and written only on success.
struct Out(Vec<u8>);

impl Out {
    fn line(&mut self, value: &impl Serialize) -> Result<()> {
        let s = serde_json::to_string(value).map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(self.0, "{s}").map_err(|e| Error::Internal(e.to_string()))
    }
}

fn write_out(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Internal(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| Error::Internal(format!("{}: {e}", path.display())))
}

fn rank(
    out: &mut Out,
    input: &Path,
    sample: Option<usize>,
    seed: u64,
    pooling: Pooling,
    method: SpectrumMethod,
) -> Result<()> {
    let mut set = read_container_file(input)?;
    if let Some(k) = sample {
        set = sample_sequences(&set, k, seed)?;
    }
    let pooled = pool(&set, pooling)?;
    let r = seqrank::spectral::rankme_with(&pooled, method)?;
    out.line(&json!({
        "rank": r.value,
        "retained": r.retained_count,
        "n": set.len(),
        "d": set.dim(),
        "seed": seed,
    }))
}

fn scan(out: &mut Out, manifest: &Path, workers: usize) -> Result<()> {
    let manifest = RunManifest::load(manifest)?;
    let outcome = scan_run(
        &manifest,
        &ScanOptions {
            workers,
            append_history: true,
        },
    )?;
    for r in &outcome.records {
        out.line(&json!({ "kind": "rank", "record": r }))?;
    }
    for g in &outcome.gaps {
        out.line(&json!({ "kind": "gap", "step": g.step, "layer": g.layer, "path": g.path }))?;
    }
    eprintln!(
        "scanned {} cells: {} measured, {} missing; history {}",
        outcome.records.len() + outcome.gaps.len(),
        outcome.records.len(),
        outcome.gaps.len(),
        manifest.history_path().display()
    );
    Ok(())
}

fn correlate(
    out: &mut Out,
    history: &Path,
    metrics: &Path,
    grouping: Grouping,
    report_path: &Path,
    format: ReportFormat,
    plots: Option<&Path>,
) -> Result<()> {
    let ranks = read_history(history)?;
    let metrics = read_metrics_file(metrics)?;
    let report = match correlate_run(&ranks, &metrics, grouping) {
        Err(MonitorError::EmptyJoin {
            unmatched_metric_keys,
            unmatched_rank_keys,
        }) => {
            for k in &unmatched_metric_keys {
                eprintln!("unmatched metric key {k}");
            }
            for k in &unmatched_rank_keys {
                eprintln!("unmatched rank key {k}");
            }
            return Err(MonitorError::EmptyJoin {
                unmatched_metric_keys,
                unmatched_rank_keys,
            }
            .into());
        }
        r => r?,
    };
    write_out(report_path, &emit_report(&report, format))?;
    if let Some(dir) = plots {
        write_plot_data(dir, &ranks, &report.observations)?;
    }
    for g in &report.groups {
        out.line(&json!({ "group": g.group, "tau": g.tau, "p_value": g.p_value, "n": g.n }))?;
    }
    for g in &report.diagnostics.insufficient_groups {
        eprintln!("group {} has {} observation(s); skipped", g.group, g.n);
    }
    for b in report.best_layers.iter().filter(|b| !b.agree) {
        eprintln!(
            "task {}: best layer by metric is {}, by rank {}",
            b.task, b.best_layer_by_metric, b.best_layer_by_rank
        );
    }
    Ok(())
}

fn synth(out: &mut Out, plan: &Path, dir: &Path) -> Result<()> {
    let plan = TrajectoryPlan::load(plan)?;
    let manifest = plant_run(&plan, dir)?;
    out.line(&json!({
        "manifest": dir.join(MANIFEST_FILE),
        "planned_ranks": dir.join(PLANNED_RANKS_FILE),
        "metrics": (!plan.tasks.is_empty()).then(|| dir.join(METRICS_FILE)),
        "containers": manifest.steps.len() * manifest.layers.len(),
    }))
}

fn report(out: &mut Out, history: &Path, plots: &Path, metrics: Option<&Path>) -> Result<()> {
    let ranks = read_history(history)?;
    if ranks.is_empty() {
        return Err(MonitorError::EmptyHistory {
            path: history.to_path_buf(),
        }
        .into());
    }
    let observations = match metrics {
        Some(m) => join(&ranks, &read_metrics_file(m)?).0,
        None => Vec::new(),
    };
    for path in write_plot_data(plots, &ranks, &observations)? {
        let rows = std::fs::read_to_string(&path)
            .map(|s| s.lines().count().saturating_sub(1))
            .unwrap_or(0);
        out.line(&json!({ "path": path, "rows": rows }))?;
    }
    Ok(())
}

fn run(cli: Cli, out: &mut Out) -> Result<()> {
    match cli.command {
        Command::Rank {
            input,
            sample,
            seed,
            pool,
            method,
        } => rank(out, &input, sample, seed, pool, method.into()),
        Command::Scan { manifest, workers } => scan(out, &manifest, workers),
        Command::Correlate {
            history,
            metrics,
            group,
            out: path,
            format,
            plots,
        } => correlate(
            out,
            &history,
            &metrics,
            group,
            &path,
            format.into(),
            plots.as_deref(),
        ),
        Command::Synth { plan, out: dir } => synth(out, &plan, &dir),
        Command::Report {
            history,
            plots,
            metrics,
        } => report(out, &history, &plots, metrics.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Out(Vec::new());
    match run(cli, &mut out) {
        Ok(()) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(&out.0).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Running seeds, writing traces with their metadata, and sweep aggregation.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vgne_core::learner::{run, RunConfig, RunError, Trace};
use vgne_core::oracle::{fit_rate_series, RateFit};
use vgne_core::DVector;

use crate::config::{write_json, Experiment, GameRef};
use crate::csvio::{trace_header, write_aggregate_csv, write_trace_csv, AggregateRow};
use crate::error::{input, io_err, CliError, CliResult};

/// Sweeps need at least this many seeds.
pub const MIN_SWEEP_SEEDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetRecord {
    pub mode: String,
    pub interior: bool,
    pub delta: f64,
    pub gamma: [f64; 2],
    pub eps: [f64; 2],
    pub sigma: [f64; 2],
    pub rho: [f64; 2],
}

/// Sidecar written next to every trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub seed: u64,
    pub config_hash: String,
    pub game: String,
    /// Constant and exponent of each schedule.
    pub preset: PresetRecord,
    pub horizon: u64,
    pub steps: u64,
    /// True when the run aborted and the trace stops early.
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub columns: Vec<String>,
    pub reference_attached: bool,
    pub max_lam_norm: f64,
    pub max_box_violation: f64,
    pub min_lam: f64,
}

pub fn game_label(exp: &Experiment) -> String {
    match &exp.config.game {
        GameRef::Named(n) => n.clone(),
        GameRef::Inline(_) => "inline".to_string(),
    }
}

pub fn preset_record(exp: &Experiment) -> PresetRecord {
    let c = exp.schedule.constants();
    let x = exp.schedule.exponents();
    PresetRecord {
        mode: exp.schedule.mode().as_str().to_string(),
        interior: exp.config.schedule.interior,
        delta: exp.schedule.delta(),
        gamma: [c.gamma, x.g],
        eps: [c.eps, x.e],
        sigma: [c.sigma, x.s],
        rho: [c.rho, x.r],
    }
}

pub fn run_config(exp: &Experiment, seed: u64) -> CliResult<RunConfig> {
    let cfg = RunConfig::new(exp.game.clone(), exp.schedule, exp.config.horizon, seed)?
        .with_initial(exp.initial.mu.clone(), exp.initial.lam.clone())?
        .with_stride(exp.config.stride);
    Ok(cfg)
}

/// Runs every seed, in parallel, keeping results in seed order.
pub fn run_seeds(exp: &Experiment) -> CliResult<Vec<(u64, Result<Trace, RunError>)>> {
    let configs = exp
        .seeds
        .iter()
        .map(|s| run_config(exp, *s).map(|c| (*s, c)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(configs
        .into_par_iter()
        .map(|(seed, cfg)| (seed, run(&cfg)))
        .collect())
}

pub fn trace_stem(exp: &Experiment, seed: u64) -> String {
    format!("trace_{}_seed{seed}", exp.schedule.mode().as_str())
}

/// Writes `<stem>.csv` and `<stem>.meta.json` for one run; returns the CSV path.
pub fn write_trace_files(
    exp: &Experiment,
    dir: &Path,
    seed: u64,
    trace: &Trace,
    error: Option<&CliError>,
    reference: Option<&DVector<f64>>,
) -> CliResult<PathBuf> {
    let stem = trace_stem(exp, seed);
    let csv = dir.join(format!("{stem}.csv"));
    write_trace_csv(&csv, trace, reference)?;
    let meta = TraceMeta {
        seed,
        config_hash: exp.hash.clone(),
        game: game_label(exp),
        preset: preset_record(exp),
        horizon: exp.config.horizon,
        steps: trace.stats.steps,
        partial: error.is_some(),
        error: error.map(|e| e.to_string()),
        columns: trace_header(exp.game.dim(), exp.game.num_constraints()),
        reference_attached: reference.is_some(),
        max_lam_norm: trace.stats.max_lam_norm,
        max_box_violation: trace.stats.max_box_violation,
        min_lam: trace.stats.min_lam,
    };
    write_json(&dir.join(format!("{stem}.meta.json")), &meta)?;
    Ok(csv)
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Runs all seeds and writes their files. Aborted runs are flushed as partial traces
/// and reported through the first error.
pub fn run_and_write(
    exp: &Experiment,
    dir: &Path,
    reference: Option<&DVector<f64>>,
) -> CliResult<Vec<Trace>> {
    ensure_dir(dir)?;
    let mut traces = Vec::new();
    let mut first_err = None;
    for (seed, outcome) in run_seeds(exp)? {
        match outcome {
            Ok(trace) => {
                write_trace_files(exp, dir, seed, &trace, None, reference)?;
                traces.push(trace);
            }
            Err(e) => {
                let err = CliError::Run {
                    seed,
                    source: Box::new(e.clone()),
                };
                write_trace_files(exp, dir, seed, &e.partial, Some(&err), reference)?;
                first_err.get_or_insert(err);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(traces),
    }
}

/// Ensemble statistics of `|mu(t) - a*|` at checkpoints shared by every trace.
pub fn aggregate(traces: &[Trace], reference: &DVector<f64>) -> CliResult<Vec<AggregateRow>> {
    let first = traces.first().ok_or_else(|| input("no traces to aggregate"))?;
    let mut rows = Vec::new();
    for p in &first.points {
        let dists: Option<Vec<f64>> = traces
            .iter()
            .map(|tr| {
                tr.points
                    .binary_search_by_key(&p.t, |q| q.t)
                    .ok()
                    .map(|j| (&tr.points[j].mu - reference).norm())
            })
            .collect();
        let Some(d) = dists else { continue };
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = if d.len() > 1 {
            d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(AggregateRow {
            t: p.t,
            mean_dist: mean,
            std_dist: var.sqrt(),
            mean_sq_dist: d.iter().map(|x| x * x).sum::<f64>() / n,
            runs: d.len(),
        });
    }
    Ok(rows)
}

/// First checkpoint at which the mean distance drops below `threshold`.
pub fn first_crossing(rows: &[AggregateRow], threshold: f64) -> Option<u64> {
    rows.iter().find(|r| r.mean_dist < threshold).map(|r| r.t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub window: [u64; 2],
    pub slope: f64,
    pub intercept: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

impl FitRecord {
    fn new(window: (u64, u64), f: &RateFit) -> Self {
        Self {
            window: [window.0, window.1],
            slope: f.slope,
            intercept: f.intercept,
            std_err: f.std_err,
            ci_low: f.ci_low,
            ci_high: f.ci_high,
            points: f.points,
        }
    }
}

/// Summary written as `sweep_<mode>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub game: String,
    pub preset: PresetRecord,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    /// Fit of the mean squared distance; absent when the window has too few points.
    pub fit: Option<FitRecord>,
    pub fit_error: Option<String>,
    pub predicted_exponent: f64,
    pub initial_mean_dist: f64,
    /// First checkpoint with mean distance below 0.1 and below a tenth of the initial one.
    pub crossing_0_1: Option<u64>,
    pub crossing_tenth_initial: Option<u64>,
    pub max_lam_norm: f64,
    pub all_feasible: bool,
}

pub struct SweepOutcome {
    pub rows: Vec<AggregateRow>,
    pub report: SweepReport,
    pub traces: Vec<Trace>,
}

pub fn summarize_sweep(
    exp: &Experiment,
    traces: Vec<Trace>,
    reference: &DVector<f64>,
    interior_reference: bool,
) -> CliResult<SweepOutcome> {
    let rows = aggregate(&traces, reference)?;
    let window = exp.fit_window();
    let ts: Vec<u64> = rows.iter().map(|r| r.t).collect();
    let ms: Vec<f64> = rows.iter().map(|r| r.mean_sq_dist).collect();
    let (fit, fit_error) = match fit_rate_series(&ts, &ms, window) {
        Ok(f) => (Some(FitRecord::new(window, &f)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let initial_mean_dist = traces
        .iter()
        .map(|t| (&t.initial.mu - reference).norm())
        .sum::<f64>()
        / traces.len() as f64;
    let report = SweepReport {
        config_hash: exp.hash.clone(),
        game: game_label(exp),
        preset: preset_record(exp),
        seeds: exp.seeds.clone(),
        horizon: exp.config.horizon,
        fit,
        fit_error,
        predicted_exponent: exp.schedule.predicted_exponent(interior_reference),
        initial_mean_dist,
        crossing_0_1: first_crossing(&rows, 0.1),
        crossing_tenth_initial: first_crossing(&rows, 0.1 * initial_mean_dist),
        max_lam_norm: traces.iter().map(|t| t.stats.max_lam_norm).fold(0.0, f64::max),
        all_feasible: traces.iter().all(|t| t.stats.feasible()),
    };
    Ok(SweepOutcome {
        rows,
        report,
        traces,
    })
}

pub fn write_sweep_files(exp: &Experiment, dir: &Path, out: &SweepOutcome) -> CliResult<(PathBuf, PathBuf)> {
    let mode = exp.schedule.mode().as_str();
    let csv = dir.join(format!("sweep_{mode}.csv"));
    write_aggregate_csv(&csv, &out.rows)?;
    let json = dir.join(format!("sweep_{mode}.json"));
    write_json(&json, &out.report)?;
    Ok((csv, json))
}

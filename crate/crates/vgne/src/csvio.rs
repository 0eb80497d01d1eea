//! Trace and sweep CSV files, and a strict reader for them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use vgne_core::learner::Trace;
use vgne_core::DVector;

use crate::error::{io_err, CliError, CliResult};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_header(dim: usize, num_constraints: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=dim).map(|k| format!("mu_{k}")));
    h.extend((1..=num_constraints).map(|j| format!("lam_{j}")));
    for c in ["dist_vgne", "gnorm_pos", "gamma", "eps", "sigma", "rho"] {
        h.push(c.to_string());
    }
    h
}

/// Renders the thinned trace. `dist_vgne` is left empty without a reference.
pub fn render_trace(trace: &Trace, reference: Option<&DVector<f64>>) -> String {
    let dim = trace.initial.mu.len();
    let n = trace.initial.lam.len();
    let mut out = trace_header(dim, n).join(",");
    out.push('\n');
    for p in &trace.points {
        let mut row = vec![p.t.to_string()];
        row.extend(p.mu.iter().map(|v| fmt_num(*v)));
        row.extend(p.lam.iter().map(|v| fmt_num(*v)));
        row.push(reference.map(|a| fmt_num((&p.mu - a).norm())).unwrap_or_default());
        for v in [p.gnorm_pos, p.values.gamma, p.values.eps, p.values.sigma, p.values.rho] {
            row.push(fmt_num(v));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &Trace, reference: Option<&DVector<f64>>) -> CliResult<()> {
    fs::write(path, render_trace(trace, reference)).map_err(io_err(path))
}

/// One checkpoint of an ensemble of runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    /// Mean of `|mu(t) - a*|` over runs.
    pub mean_dist: f64,
    /// Sample standard deviation of `|mu(t) - a*|`.
    pub std_dist: f64,
    /// Mean of `|mu(t) - a*|^2`.
    pub mean_sq_dist: f64,
    pub runs: usize,
}

pub const AGGREGATE_HEADER: [&str; 5] = ["t", "mean_dist", "std_dist", "mean_sq_dist", "runs"];

pub fn render_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = AGGREGATE_HEADER.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t,
            fmt_num(r.mean_dist),
            fmt_num(r.std_dist),
            fmt_num(r.mean_sq_dist),
            r.runs
        );
    }
    out
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> CliResult<()> {
    fs::write(path, render_aggregate(rows)).map_err(io_err(path))
}

/// A parsed CSV: `None` marks an empty field.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Parses `text` requiring a header, a fixed column count, finite numbers, and a final
/// newline. Only the columns named in `may_be_empty` may have empty fields.
pub fn parse_strict(text: &str, may_be_empty: &[&str]) -> Result<CsvTable, (usize, String)> {
    if text.is_empty() {
        return Err((1, "empty file".into()));
    }
    if !text.ends_with('\n') {
        return Err((text.lines().count(), "missing final newline".into()));
    }
    let mut lines = text[..text.len() - 1].split('\n');
    let header: Vec<String> = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_string)
        .collect();
    if header.iter().any(|h| h.is_empty()) {
        return Err((1, "empty column name in header".into()));
    }
    if header.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err((1, "header row missing".into()));
    }
    let optional: Vec<bool> = header.iter().map(|h| may_be_empty.contains(&h.as_str())).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err((
                lineno,
                format!("{} fields, header has {}", fields.len(), header.len()),
            ));
        }
        let mut row = Vec::with_capacity(fields.len());
        for (k, f) in fields.iter().enumerate() {
            if f.is_empty() {
                if !optional[k] {
                    return Err((lineno, format!("empty value in column {}", header[k])));
                }
                row.push(None);
                continue;
            }
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(Some(v)),
                _ => return Err((lineno, format!("'{f}' in column {} is not a finite number", header[k]))),
            }
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_strict(path: &Path, may_be_empty: &[&str]) -> CliResult<CsvTable> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_strict(&text, may_be_empty).map_err(|(line, message)| CliError::Csv {
        path: path.to_path_buf(),
        line,
        message,
    })
}

//! Least-squares power-law fits of mean squared distance against iteration count.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{invalid, Result};
use crate::learner::Trace;

/// `log y = intercept + slope log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_err: f64,
    /// `slope -/+ 2 std_err`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// Fits points with `window.0 <= t <= window.1` and positive values. Needs five.
pub fn fit_rate_series(ts: &[u64], values: &[f64], window: (u64, u64)) -> Result<RateFit> {
    if ts.len() != values.len() {
        return Err(invalid("checkpoint and value series differ in length"));
    }
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= window.0 && **t <= window.1 && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (libm::log(*t as f64), libm::log(*v)))
        .collect();
    let n = pts.len();
    if n < 5 {
        return Err(invalid("fewer than five checkpoints in the fit window"));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(invalid("fit window spans a single checkpoint time"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - intercept - slope * p.0;
            e * e
        })
        .sum();
    let std_err = libm::sqrt(sse / (nf - 2.0) / sxx);
    Ok(RateFit {
        slope,
        intercept,
        std_err,
        ci_low: slope - 2.0 * std_err,
        ci_high: slope + 2.0 * std_err,
        points: n,
    })
}

/// Mean over traces of `|mu(t) - a*|^2` at the checkpoints present in every trace.
pub fn ensemble_mean_sq_distance(traces: &[Trace], reference: &DVector<f64>) -> Result<(Vec<u64>, Vec<f64>)> {
    let first = traces.first().ok_or_else(|| invalid("no traces to average"))?;
    let mut ts = Vec::new();
    let mut means = Vec::new();
    for (idx, p) in first.points.iter().enumerate() {
        let mut sum = 0.0;
        let mut all = true;
        for tr in traces {
            match tr.points.get(idx) {
                Some(q) if q.t == p.t => sum += (&q.mu - reference).norm_squared(),
                _ => match tr.points.binary_search_by_key(&p.t, |q| q.t) {
                    Ok(j) => sum += (&tr.points[j].mu - reference).norm_squared(),
                    Err(_) => {
                        all = false;
                        break;
                    }
                },
            }
        }
        if all {
            ts.push(p.t);
            means.push(sum / traces.len() as f64);
        }
    }
    Ok((ts, means))
}

/// Slope of the ensemble mean squared distance to `reference` within `window`.
pub fn fit_rate(traces: &[Trace], reference: &DVector<f64>, window: (u64, u64)) -> Result<RateFit> {
    let (ts, means) = ensemble_mean_sq_distance(traces, reference)?;
    fit_rate_series(&ts, &means, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<u64> {
        crate::learner::log_checkpoints(100_000)
    }

    #[test]
    fn exact_power_law() {
        let ts = grid();
        let vals: Vec<f64> = ts.iter().map(|t| libm::pow(*t as f64, -0.5)).collect();
        let fit = fit_rate_series(&ts, &vals, (1_000, 100_000)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-6);
        assert!(fit.std_err < 1e-9);
    }

    #[test]
    fn constant_series() {
        let ts = grid();
        let vals = alloc::vec![0.3; ts.len()];
        let fit = fit_rate_series(&ts, &vals, (10, 100_000)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let ts = [1000, 2000, 5000, 10_000];
        let vals = [1.0, 0.5, 0.2, 0.1];
        assert!(fit_rate_series(&ts, &vals, (1, 100_000)).is_err());
        let ts = grid();
        let vals = alloc::vec![1.0; ts.len()];
        assert!(fit_rate_series(&ts, &vals, (1_001, 1_100)).is_err());
    }
}

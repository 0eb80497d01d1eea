//! Gaussian-smoothed pseudo-gradients and the split of an estimate into
//! `m = W(mu_hat, lam) + Q + P + R`.

use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Result};
use crate::estimators::PlayerStreams;
use crate::game::{check_nonneg, GameSpec};
use crate::learner::IterationRecord;
use crate::schedules::FeedbackMode;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: DVector<f64>,
    pub std_err: DVector<f64>,
    pub samples: usize,
}

/// Monte Carlo estimate of the smoothed pseudo-gradient
/// `E[U^i(xi, lam) (xi^i - mu_hat^i)] / sigma^2`, `xi ~ N(mu_hat, sigma^2 I)`, unprojected.
///
/// The constant `U^i(mu_hat, lam)` is subtracted from each payoff, which leaves the mean
/// unchanged because the offsets have mean zero.
pub fn smoothed_pg_mc(
    game: &GameSpec,
    mu_hat: &DVector<f64>,
    lam: &DVector<f64>,
    sigma: f64,
    n_samples: usize,
    streams: &mut PlayerStreams,
) -> Result<MonteCarloEstimate> {
    check_dim("smoothing point", game.dim(), mu_hat.len())?;
    check_dim("dual variable", game.num_constraints(), lam.len())?;
    check_dim("number of random streams", game.num_players(), streams.len())?;
    check_nonneg(lam)?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma must be positive"));
    }
    if n_samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    let d = game.dim();
    let base = game.lagrangians_unchecked(mu_hat, lam);
    let owner: Vec<usize> = (0..d)
        .map(|k| (0..game.num_players()).find(|&i| game.block(i).contains(&k)).unwrap_or(0))
        .collect();
    let mut sum = DVector::<f64>::zeros(d);
    let mut sum_sq = DVector::<f64>::zeros(d);
    let mut xi = mu_hat.clone();
    let inv = 1.0 / (sigma * sigma);
    for _ in 0..n_samples {
        for i in 0..game.num_players() {
            let rng = streams.player(i);
            for k in game.block(i) {
                let z: f64 = rng.sample(StandardNormal);
                xi[k] = mu_hat[k] + sigma * z;
            }
        }
        let u = game.lagrangians_unchecked(&xi, lam);
        for k in 0..d {
            let i = owner[k];
            let v = (u[i] - base[i]) * (xi[k] - mu_hat[k]) * inv;
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let nf = n_samples as f64;
    let mean = &sum / nf;
    let std_err = DVector::from_fn(d, |k, _| {
        let var = f64::max(sum_sq[k] / nf - mean[k] * mean[k], 0.0) * nf / (nf - 1.0);
        libm::sqrt(var / nf)
    });
    Ok(MonteCarloEstimate {
        mean,
        std_err,
        samples: n_samples,
    })
}

/// The error terms of one recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `W(mu_hat, lam)`, primal block.
    pub w: DVector<f64>,
    /// Smoothing bias `W_sigma(mu_hat, lam) - W(mu_hat, lam)`.
    pub q: DVector<f64>,
    /// Projection effect `(U(a, lam) - U(xi, lam)) (xi - mu_hat) / sigma^2`.
    pub p: DVector<f64>,
    /// Zero-mean noise `m_hat - W_sigma(mu_hat, lam)`, with `m_hat` built from `U(xi, lam)`.
    pub r: DVector<f64>,
    /// Constraint-side effect `K (mu_hat - a)`.
    pub s: DVector<f64>,
}

impl Decomposition {
    pub fn reconstruct(&self) -> DVector<f64> {
        &self.w + &self.q + &self.p + &self.r
    }
}

/// Splits the estimate of `record` given a value for the smoothed pseudo-gradient at
/// `(mu_hat, lam)`.
pub fn decompose_estimate(
    game: &GameSpec,
    record: &IterationRecord,
    smoothed: &DVector<f64>,
) -> Result<Decomposition> {
    let d = game.dim();
    check_dim("smoothed pseudo-gradient", d, smoothed.len())?;
    check_dim("recorded query", d, record.xi.len())?;
    let sigma = record.values.sigma;
    let inv = 1.0 / (sigma * sigma);
    let w = game.eval_primal_pg(&record.mu_hat, &record.lam)?;
    let q = smoothed - &w;
    let u_xi = game.lagrangians_unchecked(&record.xi, &record.lam);
    let mut p = DVector::zeros(d);
    let mut m_hat = DVector::zeros(d);
    for i in 0..game.num_players() {
        let diff_ap = record.lagrangians[i] - u_xi[i];
        let u_hat = match (record.mode, &record.base_lagrangians) {
            (FeedbackMode::TwoPoint, Some(u0)) => u_xi[i] - u0[i],
            (FeedbackMode::TwoPoint, None) => {
                return Err(invalid("two-point record lacks the payoff at the mean"))
            }
            (FeedbackMode::OnePoint, _) => u_xi[i],
        };
        for k in game.block(i) {
            let off = record.xi[k] - record.mu_hat[k];
            p[k] = diff_ap * off * inv;
            m_hat[k] = u_hat * off * inv;
        }
    }
    let r = &m_hat - smoothed;
    let s = game.coupling_matrix() * (&record.mu_hat - &record.action);
    Ok(Decomposition { w, q, p, r, s })
}

//! Checks of the distance bounds between regularized and unregularized solutions.

use alloc::vec::Vec;

use super::vgne::{activity, ReferenceSolutions};
use super::vi::{solve_regularized_vi_from, RegularizedSolution};
use crate::error::{invalid, Result};
use crate::game::{AugmentedPoint, GameSpec};

/// Bounds at one regularization value.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsBound {
    pub eps: f64,
    /// `|a* - a*_eps|`.
    pub primal_gap: f64,
    /// `|lam* - lam*_eps|`.
    pub dual_gap: f64,
    /// `sqrt(eps |lam*|^2 / nu)`, compared against `primal_gap`.
    pub squared_bound: f64,
    /// `sqrt(eps |lam*| |lam* - lam*_eps| / nu)`, the sharper intermediate bound.
    pub intermediate_bound: f64,
    pub squared_ok: bool,
    /// `|lam* - lam*_eps| <= |lam*|`.
    pub dual_ok: bool,
    /// `eps |lam*| L / (|K| nu)`, only when `a*` is interior to the action set.
    pub linear_bound: Option<f64>,
    pub linear_ok: Option<bool>,
    pub solution: RegularizedSolution,
}

/// Drift witnesses between consecutive regularization values `eps_prev > eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftRatio {
    pub eps_prev: f64,
    pub eps: f64,
    /// `|a*_eps - a*_prev|^2 eps / (eps - eps_prev)^2`.
    pub primal_ratio: f64,
    /// `|lam*_eps - lam*_prev|^2 eps^2 / (eps - eps_prev)^2`.
    pub dual_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationReport {
    pub bounds: Vec<EpsBound>,
    pub drift: Vec<DriftRatio>,
    /// Allowance for solver error added to every comparison.
    pub slack: f64,
    pub interior: bool,
}

impl RegularizationReport {
    pub fn all_pass(&self) -> bool {
        self.bounds
            .iter()
            .all(|b| b.squared_ok && b.dual_ok && b.linear_ok.unwrap_or(true))
    }

    /// `max / min` of the primal drift ratios, ignoring ratios below `floor`.
    pub fn primal_drift_spread(&self, floor: f64) -> f64 {
        spread(self.drift.iter().map(|d| d.primal_ratio), floor)
    }

    pub fn dual_drift_spread(&self, floor: f64) -> f64 {
        spread(self.drift.iter().map(|d| d.dual_ratio), floor)
    }

    /// Both drift ratios stay below ten times their value at the largest `eps` (or
    /// below `floor`) as `eps` decreases.
    pub fn drift_bounded(&self, floor: f64) -> bool {
        let Some(first) = self.drift.first() else {
            return true;
        };
        let cap_a = 10.0 * first.primal_ratio.max(floor);
        let cap_l = 10.0 * first.dual_ratio.max(floor);
        self.drift
            .iter()
            .all(|d| d.primal_ratio <= cap_a && d.dual_ratio <= cap_l)
    }
}

fn spread(values: impl Iterator<Item = f64>, floor: f64) -> f64 {
    let (lo, hi) = values
        .filter(|v| *v > floor)
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

/// Solves the regularized problem for each value in `eps_list` (warm-started, in the
/// given order) and checks the bounds against `reference`. Comparisons allow `slack`
/// for solver error in both solutions.
pub fn check_regularization_bounds(
    game: &GameSpec,
    reference: &ReferenceSolutions,
    eps_list: &[f64],
    tol: f64,
) -> Result<RegularizationReport> {
    if eps_list.is_empty() {
        return Err(invalid("need at least one regularization value"));
    }
    let c = &reference.constants;
    let lam_norm = reference.dual.norm();
    let slack = 10.0 * tol;
    let interior = activity(game, &reference.primal)?.box_interior(1e-9);
    let mut start = AugmentedPoint::new(reference.primal.clone(), reference.dual.clone())?;
    let mut bounds: Vec<EpsBound> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let sol = solve_regularized_vi_from(game, eps, (tol * 1e-3).max(1e-13), c, &start)?;
        start = sol.point.clone();
        let primal_gap = (&reference.primal - sol.point.primal()).norm();
        let dual_gap = (&reference.dual - sol.point.dual()).norm();
        let squared_bound = libm::sqrt(eps * lam_norm * lam_norm / c.nu);
        let intermediate_bound = libm::sqrt(eps * lam_norm * dual_gap / c.nu);
        let (linear_bound, linear_ok) = if interior && c.k_norm > 0.0 {
            let lb = eps * lam_norm * c.lip / (c.k_norm * c.nu);
            (Some(lb), Some(primal_gap <= lb + slack))
        } else {
            (None, None)
        };
        bounds.push(EpsBound {
            eps,
            primal_gap,
            dual_gap,
            squared_bound,
            intermediate_bound,
            squared_ok: primal_gap <= squared_bound + slack,
            dual_ok: dual_gap <= lam_norm + slack,
            linear_bound,
            linear_ok,
            solution: sol,
        });
    }
    let drift = bounds
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let de = cur.eps - prev.eps;
            let da = (cur.solution.point.primal() - prev.solution.point.primal()).norm_squared();
            let dl = (cur.solution.point.dual() - prev.solution.point.dual()).norm_squared();
            DriftRatio {
                eps_prev: prev.eps,
                eps: cur.eps,
                primal_ratio: da * cur.eps / (de * de),
                dual_ratio: dl * cur.eps * cur.eps / (de * de),
            }
        })
        .collect();
    Ok(RegularizationReport {
        bounds,
        drift,
        slack,
        interior,
    })
}

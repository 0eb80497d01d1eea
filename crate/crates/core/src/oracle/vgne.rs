//! The variational GNE `(a*, lam*)` from two independent methods.

use alloc::vec::Vec;

use nalgebra::DVector;

use super::constants::{estimate_constants, GameConstants};
use super::kkt::{solve_kkt, KktSolution, MAX_KKT_CHOICES};
use super::vi::{natural_residual, solve_regularized_vi_from, RegularizedSolution};
use crate::error::{invalid, Error, Result};
use crate::game::{AugmentedPoint, GameSpec};
use crate::geometry::project_box_in_place;

/// Regularization values walked by the path method, largest first.
pub const PATH_EPS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolutions {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
    /// `"kkt+path"` when both methods ran, `"path"` otherwise.
    pub method: &'static str,
    /// Natural residual of the unregularized `W` at `(primal, dual)`.
    pub residual: f64,
    pub constants: GameConstants,
    /// Extrapolated regularization-path estimate.
    pub path_primal: DVector<f64>,
    pub path_dual: DVector<f64>,
    /// `|a*_{eps_min} - a*_{10 eps_min}|`, the size of the last path correction.
    pub path_stability: f64,
    pub path_solutions: Vec<RegularizedSolution>,
    pub kkt: Option<KktSolution>,
    /// Primal gap between the two methods, when both ran.
    pub method_gap: Option<f64>,
}

/// Computes `(a*, lam*)` by a warm-started regularization path with Richardson
/// extrapolation and, when `M` is affine and the game small, by active-set enumeration.
/// The two primal answers must agree within `10 tol`.
pub fn solve_vgne(game: &GameSpec, tol: f64) -> Result<ReferenceSolutions> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let constants = estimate_constants(game, 2000)?;
    let solver_tol = (tol * 1e-4).max(1e-13);
    let mut start = AugmentedPoint::new(
        game.joint_set().midpoint(),
        DVector::zeros(game.num_constraints()),
    )?;
    let mut path = Vec::with_capacity(PATH_EPS.len());
    for eps in PATH_EPS {
        let sol = solve_regularized_vi_from(game, eps, solver_tol, &constants, &start)?;
        start = sol.point.clone();
        path.push(sol);
    }
    let fine = &path[PATH_EPS.len() - 1].point;
    let coarse = &path[PATH_EPS.len() - 2].point;
    // first-order error in eps cancels with the factor 10 between the last two values
    let mut path_primal = (fine.primal() * 10.0 - coarse.primal()) / 9.0;
    project_box_in_place(game.joint_set(), &mut path_primal);
    let path_dual = ((fine.dual() * 10.0 - coarse.dual()) / 9.0).map(|v| v.max(0.0));
    let path_stability = (fine.primal() - coarse.primal()).norm();

    let movable = (0..game.dim())
        .filter(|&k| game.joint_set().lower()[k] < game.joint_set().upper()[k])
        .count();
    let kkt = if game.has_affine_pseudo_gradient()
        && game.num_constraints() + 2 * movable <= MAX_KKT_CHOICES
    {
        Some(solve_kkt(game)?)
    } else {
        None
    };

    let (primal, dual, method, method_gap) = match &kkt {
        Some(k) => {
            let gap = (&k.primal - &path_primal).amax();
            if gap > 10.0 * tol {
                return Err(Error::MethodDisagreement {
                    gap,
                    allowed: 10.0 * tol,
                });
            }
            (k.primal.clone(), k.dual.clone(), "kkt+path", Some(gap))
        }
        None => (path_primal.clone(), path_dual.clone(), "path", None),
    };
    let residual = natural_residual(game, &AugmentedPoint::new(primal.clone(), dual.clone())?, 0.0)?;
    Ok(ReferenceSolutions {
        primal,
        dual,
        method,
        residual,
        constants,
        path_primal,
        path_dual,
        path_stability,
        path_solutions: path,
        kkt,
        method_gap,
    })
}

/// Which constraints bind at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Activity {
    /// `l - K a`, nonnegative when feasible.
    pub coupling_slack: DVector<f64>,
    /// Distance of each coordinate to the nearer bound of its interval.
    pub box_margin: DVector<f64>,
    /// Smallest entry over both vectors.
    pub min_margin: f64,
}

impl Activity {
    /// True when every constraint is slack by more than `margin`.
    pub fn all_inactive(&self, margin: f64) -> bool {
        self.min_margin > margin
    }

    pub fn box_interior(&self, margin: f64) -> bool {
        self.box_margin.iter().all(|m| *m > margin)
    }

    pub fn active_coupling(&self, margin: f64) -> Vec<usize> {
        (0..self.coupling_slack.len())
            .filter(|&j| self.coupling_slack[j] <= margin)
            .collect()
    }
}

pub fn activity(game: &GameSpec, a: &DVector<f64>) -> Result<Activity> {
    let coupling_slack = -game.eval_constraint(a)?;
    let set = game.joint_set();
    let box_margin = DVector::from_fn(a.len(), |k, _| {
        (a[k] - set.lower()[k]).min(set.upper()[k] - a[k])
    });
    let min_margin = coupling_slack
        .iter()
        .chain(box_margin.iter())
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(Activity {
        coupling_slack,
        box_margin,
        min_margin,
    })
}

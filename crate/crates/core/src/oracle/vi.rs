//! Solver for the regularized variational inequality `VI(W_eps, A x R^n_+)`.
//!
//! For a fixed multiplier the primal part is the unique solution of `VI(M + K^T lam, A)`,
//! found by projected gradient with step `nu / L^2`. The multiplier is then updated by a
//! projected step on `-g(a(lam)) + eps lam`, which is strongly monotone and co-coercive,
//! with step `1 / (eps + |K|^2 / nu)`. Inner solves are warm-started.

use alloc::format;

use nalgebra::DVector;

use super::constants::GameConstants;
use crate::error::{check_dim, invalid, Error, Result};
use crate::game::{AugmentedPoint, GameSpec};
use crate::geometry::project_box_in_place;

/// Cap on the total number of primal gradient evaluations.
pub const MAX_VI_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedSolution {
    pub point: AugmentedPoint,
    pub eps: f64,
    /// Primal gradient evaluations spent.
    pub iterations: usize,
    /// [`natural_residual`] of `W_eps` at the solution.
    pub residual: f64,
}

/// `|z - Proj_{A x R^n_+}[z - W_eps(z)]|`; zero exactly at a solution.
pub fn natural_residual(game: &GameSpec, p: &AugmentedPoint, eps: f64) -> Result<f64> {
    let w = game.eval_regularized_pg(p, eps)?;
    let d = game.dim();
    let mut a = p.primal() - w.rows(0, d);
    let mut lam = p.dual() - w.rows(d, game.num_constraints());
    super::project_augmented(game, &mut a, &mut lam);
    let ra = (p.primal() - a).norm_squared();
    let rl = (p.dual() - lam).norm_squared();
    Ok(libm::sqrt(ra + rl))
}

/// Solves from the box midpoint and a zero multiplier.
pub fn solve_regularized_vi(game: &GameSpec, eps: f64, tol: f64) -> Result<RegularizedSolution> {
    let constants = super::estimate_constants(game, 2000)?;
    let start = AugmentedPoint::new(
        game.joint_set().midpoint(),
        DVector::zeros(game.num_constraints()),
    )?;
    solve_regularized_vi_from(game, eps, tol, &constants, &start)
}

/// Solves from `start`. Stops when the primal inner loop and the dual update both move by
/// less than `tol` (scaled by their contraction factors).
pub fn solve_regularized_vi_from(
    game: &GameSpec,
    eps: f64,
    tol: f64,
    constants: &GameConstants,
    start: &AugmentedPoint,
) -> Result<RegularizedSolution> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("regularization must be positive, got {eps}")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    check_dim("start primal", game.dim(), start.primal().len())?;
    check_dim("start dual", game.num_constraints(), start.dual().len())?;
    let nu = constants.nu;
    let lip = constants.lip.max(nu);
    let alpha = nu / (lip * lip);
    let contraction = libm::sqrt((1.0 - nu * nu / (lip * lip)).max(0.0));
    let inner_tol = (tol * (1.0 - contraction)).max(1e-15);
    let beta = 1.0 / (eps + constants.k_norm * constants.k_norm / nu);

    let mut a = start.primal().clone();
    project_box_in_place(game.joint_set(), &mut a);
    let mut lam = start.dual().map(|v| v.max(0.0));
    let mut evals = 0_usize;
    let mut last_move = f64::INFINITY;

    loop {
        primal_response(game, &lam, &mut a, alpha, inner_tol, &mut evals)?;
        if lam.is_empty() {
            break;
        }
        let g = game.eval_constraint(&a)?;
        let next = (&lam + (g - &lam * eps) * beta).map(|v| v.max(0.0));
        last_move = (&next - &lam).norm();
        lam = next;
        if last_move <= tol * beta.min(1.0) {
            primal_response(game, &lam, &mut a, alpha, inner_tol, &mut evals)?;
            break;
        }
        if evals >= MAX_VI_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations: evals,
                residual: last_move,
            });
        }
    }
    let point = AugmentedPoint::new(a, lam)?;
    let residual = natural_residual(game, &point, eps)?;
    if !residual.is_finite() {
        return Err(Error::NoConvergence {
            iterations: evals,
            residual: last_move,
        });
    }
    Ok(RegularizedSolution {
        point,
        eps,
        iterations: evals,
        residual,
    })
}

/// Projected gradient on `VI(M + K^T lam, A)` from `a` until a step shorter than `tol`.
fn primal_response(
    game: &GameSpec,
    lam: &DVector<f64>,
    a: &mut DVector<f64>,
    alpha: f64,
    tol: f64,
    evals: &mut usize,
) -> Result<()> {
    let shift = game.coupling_matrix().tr_mul(lam);
    loop {
        let grad = game.eval_pseudo_gradient(a)? + &shift;
        let mut next = &*a - grad * alpha;
        project_box_in_place(game.joint_set(), &mut next);
        let step = (&next - &*a).norm();
        *a = next;
        *evals += 1;
        if step <= tol {
            return Ok(());
        }
        if *evals >= MAX_VI_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations: *evals,
                residual: step,
            });
        }
    }
}

//! Full-information reference computations used to check the learner: game constants,
//! regularized and unregularized equilibria, smoothed gradients, the error decomposition
//! of the estimates, the regularization bounds and rate fits.

mod bounds;
mod constants;
mod decomposition;
mod kkt;
mod rates;
mod vgne;
mod vi;

use nalgebra::{DMatrix, DVector};

pub use bounds::{check_regularization_bounds, DriftRatio, EpsBound, RegularizationReport};
pub use constants::{
    estimate_constants, jacobian, sampled_constants, ConstantsMethod, GameConstants, SampledConstants,
};
pub use decomposition::{decompose_estimate, smoothed_pg_mc, Decomposition, MonteCarloEstimate};
pub use kkt::{solve_kkt, KktSolution, MAX_KKT_CHOICES};
pub use rates::{ensemble_mean_sq_distance, fit_rate, fit_rate_series, RateFit};
pub use vgne::{activity, solve_vgne, Activity, ReferenceSolutions, PATH_EPS};
pub use vi::{natural_residual, solve_regularized_vi, solve_regularized_vi_from, RegularizedSolution, MAX_VI_ITERATIONS};

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `Proj_{A x R^n_+}`.
pub(crate) fn project_augmented(game: &crate::game::GameSpec, a: &mut DVector<f64>, lam: &mut DVector<f64>) {
    crate::geometry::project_box_in_place(game.joint_set(), a);
    crate::geometry::project_nonneg_in_place(lam);
}

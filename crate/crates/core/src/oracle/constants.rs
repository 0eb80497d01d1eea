use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::GameSpec;

/// How the constants were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantsMethod {
    /// Eigen- and singular values of the (constant) Jacobian of an affine `M`.
    Jacobian,
    /// Extreme ratios over random pairs of points.
    Sampled,
}

/// Strong monotonicity modulus `nu` and Lipschitz constant `lip` of `M`, plus `|K|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConstants {
    pub nu: f64,
    pub lip: f64,
    pub k_norm: f64,
    pub method: ConstantsMethod,
}

impl GameConstants {
    /// Upper bound on the Lipschitz constant of the augmented map `W`.
    pub fn augmented_lipschitz(&self) -> f64 {
        self.lip + self.k_norm
    }
}

/// Jacobian of `M` at `at` by central differences with step `h`.
pub fn jacobian(game: &GameSpec, at: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    let d = game.dim();
    let mut jac = DMatrix::zeros(d, d);
    let mut probe = at.clone();
    for k in 0..d {
        let orig = probe[k];
        probe[k] = orig + h;
        let up = game.eval_pseudo_gradient(&probe)?;
        probe[k] = orig - h;
        let down = game.eval_pseudo_gradient(&probe)?;
        probe[k] = orig;
        jac.set_column(k, &((up - down) / (2.0 * h)));
    }
    Ok(jac)
}

/// Sample-based extremes over random pairs drawn from the joint box widened by one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledConstants {
    /// Smallest `<M(x) - M(y), x - y> / |x - y|^2` seen.
    pub nu: f64,
    /// Largest `|M(x) - M(y)| / |x - y|` seen.
    pub lip: f64,
}

pub fn sampled_constants(game: &GameSpec, n_samples: usize, seed: u64) -> Result<SampledConstants> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = game.joint_set();
    let d = game.dim();
    let draw = |rng: &mut ChaCha8Rng| {
        DVector::from_fn(d, |k, _| {
            rng.random_range((set.lower()[k] - 1.0)..=(set.upper()[k] + 1.0))
        })
    };
    let mut nu = f64::INFINITY;
    let mut lip: f64 = 0.0;
    for _ in 0..n_samples {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let dx = &x - &y;
        let dist_sq = dx.norm_squared();
        if dist_sq < 1e-12 {
            continue;
        }
        let dm = game.eval_pseudo_gradient(&x)? - game.eval_pseudo_gradient(&y)?;
        nu = nu.min(dm.dot(&dx) / dist_sq);
        lip = lip.max(dm.norm() / libm::sqrt(dist_sq));
    }
    Ok(SampledConstants { nu, lip })
}

/// `nu` and `lip` of the pseudo-gradient. Affine games use the exact Jacobian spectrum;
/// others use `n_samples` random pairs. Fails when `nu <= 0`.
pub fn estimate_constants(game: &GameSpec, n_samples: usize) -> Result<GameConstants> {
    let k_norm = super::spectral_norm(game.coupling_matrix());
    let (nu, lip, method) = if game.has_affine_pseudo_gradient() {
        // central differences with a unit step are exact for an affine map
        let jac = jacobian(game, &game.joint_set().midpoint(), 1.0)?;
        let sym = (&jac + jac.transpose()) * 0.5;
        let nu = sym.symmetric_eigenvalues().min();
        let lip = super::spectral_norm(&jac);
        (nu, lip, ConstantsMethod::Jacobian)
    } else {
        let s = sampled_constants(game, n_samples.max(1), 0x6e75)?;
        (s.nu, s.lip, ConstantsMethod::Sampled)
    };
    if !(nu > 1e-12) {
        return Err(Error::NotStronglyMonotone { nu });
    }
    Ok(GameConstants {
        nu,
        lip: lip.max(nu),
        k_norm,
        method,
    })
}

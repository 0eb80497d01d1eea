//! Gaussian query sampling and the payoff-based pseudo-gradient estimates.
//!
//! Each player draws `xi^i ~ N(mu_hat^i, sigma^2 I)` from its own random stream, plays the
//! projection of `xi^i` onto its action set, and forms
//!
//! ```text
//! one-point:  m_1^i = U^i(a, lam) (xi^i - mu_hat^i) / sigma^2
//! two-point:  m_2^i = (U^i(a, lam) - U^i(mu_hat, lam)) (xi^i - mu_hat^i) / sigma^2
//! ```

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, invalid, Result};
use crate::game::GameSpec;
use crate::geometry::project_box;

/// One joint query: the raw Gaussian draw, the played action and the per-player offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySample {
    pub xi: DVector<f64>,
    pub action: DVector<f64>,
    /// `xi^i - mu_hat^i` for every player.
    pub offsets: Vec<DVector<f64>>,
}

/// One independent ChaCha stream per player, all derived from a single seed.
#[derive(Debug, Clone)]
pub struct PlayerStreams {
    seed: u64,
    streams: Vec<ChaCha8Rng>,
}

impl PlayerStreams {
    pub fn new(seed: u64, num_players: usize) -> Self {
        let streams = (0..num_players)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        Self { seed, streams }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn player(&mut self, i: usize) -> &mut ChaCha8Rng {
        &mut self.streams[i]
    }
}

/// Source of query points. The learner uses [`PlayerStreams`]; tests can substitute a
/// deterministic sampler.
pub trait QuerySampler {
    fn sample(&mut self, game: &GameSpec, mu_hat: &DVector<f64>, sigma: f64)
        -> Result<QuerySample>;
}

impl QuerySampler for PlayerStreams {
    fn sample(
        &mut self,
        game: &GameSpec,
        mu_hat: &DVector<f64>,
        sigma: f64,
    ) -> Result<QuerySample> {
        sample_query(game, mu_hat, sigma, self)
    }
}

/// Always queries the mean itself, `xi = mu_hat`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanSampler;

impl QuerySampler for MeanSampler {
    fn sample(
        &mut self,
        game: &GameSpec,
        mu_hat: &DVector<f64>,
        sigma: f64,
    ) -> Result<QuerySample> {
        check_sigma(sigma)?;
        check_dim("query mean", game.dim(), mu_hat.len())?;
        build_sample(game, mu_hat, mu_hat.clone())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("sigma must be positive, got {sigma}")))
    }
}

fn build_sample(game: &GameSpec, mu_hat: &DVector<f64>, xi: DVector<f64>) -> Result<QuerySample> {
    let mut action = DVector::zeros(game.dim());
    let mut offsets = Vec::with_capacity(game.num_players());
    for i in 0..game.num_players() {
        let b = game.block(i);
        let xi_i = xi.rows(b.start, b.len()).into_owned();
        let a_i = project_box(game.local_set(i), &xi_i);
        action.rows_mut(b.start, b.len()).copy_from(&a_i);
        offsets.push(xi_i - mu_hat.rows(b.start, b.len()));
    }
    Ok(QuerySample {
        xi,
        action,
        offsets,
    })
}

/// Draws `xi ~ N(mu_hat, sigma^2 I)`, player `i` using stream `i`, and projects blockwise.
pub fn sample_query(
    game: &GameSpec,
    mu_hat: &DVector<f64>,
    sigma: f64,
    streams: &mut PlayerStreams,
) -> Result<QuerySample> {
    check_sigma(sigma)?;
    check_dim("query mean", game.dim(), mu_hat.len())?;
    check_dim("number of random streams", game.num_players(), streams.len())?;
    let mut xi = mu_hat.clone();
    for i in 0..game.num_players() {
        let rng = streams.player(i);
        for k in game.block(i) {
            let z: f64 = rng.sample(StandardNormal);
            xi[k] += sigma * z;
        }
    }
    build_sample(game, mu_hat, xi)
}

/// `u_val (xi_i - mu_hat_i) / sigma^2`.
pub fn one_point_estimate(
    u_val: f64,
    xi_i: &DVector<f64>,
    mu_hat_i: &DVector<f64>,
    sigma: f64,
) -> Result<DVector<f64>> {
    check_sigma(sigma)?;
    check_dim("query block", mu_hat_i.len(), xi_i.len())?;
    Ok((xi_i - mu_hat_i) * (u_val / (sigma * sigma)))
}

/// `(u_val - u0_val) (xi_i - mu_hat_i) / sigma^2`.
pub fn two_point_estimate(
    u_val: f64,
    u0_val: f64,
    xi_i: &DVector<f64>,
    mu_hat_i: &DVector<f64>,
    sigma: f64,
) -> Result<DVector<f64>> {
    one_point_estimate(u_val - u0_val, xi_i, mu_hat_i, sigma)
}

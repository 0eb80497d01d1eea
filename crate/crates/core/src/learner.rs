//! The payoff-based primal-dual learning loop.
//!
//! One step at schedule index `t` (`t = 1` for the first step):
//!
//! ```text
//! mu_hat^i = Proj_{(1 - rho_t) A^i} mu^i
//! xi^i     ~ N(mu_hat^i, sigma_t^2 I),   a^i = Proj_{A^i} xi^i
//! mu^i    <- Proj_{A^i} [mu^i - gamma_t m^i]
//! lam     <- max(0, lam - gamma_t (-(K a - l) + eps_t lam))
//! ```
//!
//! The dual iterate is shared by all players and updated once per step.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{check_dim, invalid, Error, Result};
use crate::estimators::{one_point_estimate, two_point_estimate, PlayerStreams, QuerySampler};
use crate::game::{check_nonneg, GameSpec};
use crate::geometry::{default_shrink_center, project_box, project_box_in_place};
use crate::schedules::{FeedbackMode, ScheduleConfig, ScheduleValues};

/// Iterates `(mu, lam)` after `t` completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub mu: DVector<f64>,
    pub lam: DVector<f64>,
    pub t: u64,
}

impl LearnerState {
    /// Validates `mu in A` and `lam >= 0`.
    pub fn new(game: &GameSpec, mu: DVector<f64>, lam: DVector<f64>) -> Result<Self> {
        check_dim("initial primal iterate", game.dim(), mu.len())?;
        check_dim("initial dual iterate", game.num_constraints(), lam.len())?;
        if !game.joint_set().contains(&mu, 0.0) {
            return Err(invalid("initial primal iterate lies outside the action set"));
        }
        check_nonneg(&lam)?;
        Ok(Self { mu, lam, t: 0 })
    }

    /// Box midpoints and a zero multiplier.
    pub fn initial(game: &GameSpec) -> Self {
        Self {
            mu: game.joint_set().midpoint(),
            lam: DVector::zeros(game.num_constraints()),
            t: 0,
        }
    }
}

/// Everything used by one step, exactly as used.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Schedule index of the step (the state it produces has `t` completed steps).
    pub t: u64,
    pub mode: FeedbackMode,
    pub mu: DVector<f64>,
    pub lam: DVector<f64>,
    pub mu_hat: DVector<f64>,
    pub xi: DVector<f64>,
    pub action: DVector<f64>,
    /// `g(a) = K a - l`.
    pub g_val: DVector<f64>,
    /// `J^i(a)`.
    pub costs: Vec<f64>,
    /// `U^i(a, lam)`.
    pub lagrangians: Vec<f64>,
    /// `U^i(mu_hat, lam)`, two-point feedback only.
    pub base_lagrangians: Option<Vec<f64>>,
    /// Stacked estimates `m^i`.
    pub estimates: DVector<f64>,
    pub values: ScheduleValues,
}

/// Concatenated default shrink centers of the players' boxes.
pub fn shrink_centers(game: &GameSpec) -> DVector<f64> {
    let mut c = DVector::zeros(game.dim());
    for i in 0..game.num_players() {
        let b = game.block(i);
        c.rows_mut(b.start, b.len())
            .copy_from(&default_shrink_center(game.local_set(i)));
    }
    c
}

/// `Proj_{(1 - rho) A} mu`, each player's box scaled about its default center.
pub fn shrunk_projection(game: &GameSpec, centers: &DVector<f64>, mu: &DVector<f64>, rho: f64) -> DVector<f64> {
    let set = game.joint_set();
    let scale = 1.0 - rho;
    let mut out = mu.clone();
    for k in 0..out.len() {
        let c = centers[k];
        let lo = c + scale * (set.lower()[k] - c);
        let hi = c + scale * (set.upper()[k] - c);
        out[k] = out[k].clamp(lo, hi);
    }
    out
}

fn check_finite(t: u64, quantity: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(value) => Err(Error::NonFinite {
            t: t as usize,
            quantity,
            value: *value,
        }),
        None => Ok(()),
    }
}

/// One step with schedule values at index `state.t + 1`.
pub fn step<S: QuerySampler + ?Sized>(
    game: &GameSpec,
    state: &LearnerState,
    cfg: &ScheduleConfig,
    sampler: &mut S,
) -> Result<(LearnerState, IterationRecord)> {
    let values = cfg.at(state.t + 1)?;
    step_with_values(game, state, cfg.mode(), values, sampler)
}

/// One step with explicitly supplied parameter values.
pub fn step_with_values<S: QuerySampler + ?Sized>(
    game: &GameSpec,
    state: &LearnerState,
    mode: FeedbackMode,
    values: ScheduleValues,
    sampler: &mut S,
) -> Result<(LearnerState, IterationRecord)> {
    let centers = shrink_centers(game);
    step_inner(game, &centers, state, mode, values, sampler)
}

fn step_inner<S: QuerySampler + ?Sized>(
    game: &GameSpec,
    centers: &DVector<f64>,
    state: &LearnerState,
    mode: FeedbackMode,
    values: ScheduleValues,
    sampler: &mut S,
) -> Result<(LearnerState, IterationRecord)> {
    check_dim("primal iterate", game.dim(), state.mu.len())?;
    check_dim("dual iterate", game.num_constraints(), state.lam.len())?;
    if !(0.0..1.0).contains(&values.rho) {
        return Err(invalid("rho must lie in [0, 1)"));
    }
    let t = state.t + 1;
    let ScheduleValues {
        gamma, eps, sigma, rho,
    } = values;

    let mu_hat = shrunk_projection(game, centers, &state.mu, rho);
    let q = sampler.sample(game, &mu_hat, sigma)?;
    let g_val = game.constraint_unchecked(&q.action);
    let penalty = state.lam.dot(&g_val);
    let costs: Vec<f64> = (0..game.num_players())
        .map(|i| game.cost_oracle(i).cost(&q.action))
        .collect();
    let lagrangians: Vec<f64> = costs.iter().map(|j| j + penalty).collect();
    check_finite(t, "payoff", &lagrangians)?;
    let base_lagrangians = match mode {
        FeedbackMode::OnePoint => None,
        FeedbackMode::TwoPoint => {
            let u0 = game.lagrangians_unchecked(&mu_hat, &state.lam);
            check_finite(t, "payoff at the mean", &u0)?;
            Some(u0)
        }
    };

    let mut estimates = DVector::zeros(game.dim());
    for i in 0..game.num_players() {
        let b = game.block(i);
        let mh = mu_hat.rows(b.start, b.len()).into_owned();
        let xi = q.xi.rows(b.start, b.len()).into_owned();
        let m = match &base_lagrangians {
            None => one_point_estimate(lagrangians[i], &xi, &mh, sigma)?,
            Some(u0) => two_point_estimate(lagrangians[i], u0[i], &xi, &mh, sigma)?,
        };
        estimates.rows_mut(b.start, b.len()).copy_from(&m);
    }
    check_finite(t, "estimate", estimates.as_slice())?;

    let mut mu = &state.mu - &estimates * gamma;
    project_box_in_place(game.joint_set(), &mut mu);
    let mut lam = state.lam.clone();
    for j in 0..lam.len() {
        lam[j] = (lam[j] - gamma * (-g_val[j] + eps * lam[j])).max(0.0);
    }
    check_finite(t, "dual iterate", lam.as_slice())?;

    let record = IterationRecord {
        t,
        mode,
        mu: state.mu.clone(),
        lam: state.lam.clone(),
        mu_hat,
        xi: q.xi,
        action: q.action,
        g_val,
        costs,
        lagrangians,
        base_lagrangians,
        estimates,
        values,
    };
    Ok((LearnerState { mu, lam, t }, record))
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub game: GameSpec,
    pub schedule: ScheduleConfig,
    pub horizon: u64,
    pub seed: u64,
    pub initial: LearnerState,
    /// Keep every multiple of `stride` in addition to the log-spaced checkpoints; 0 disables.
    pub stride: u64,
    /// Keep the full [`IterationRecord`] of every step.
    pub keep_records: bool,
}

impl RunConfig {
    /// Starts from box midpoints and a zero multiplier.
    pub fn new(game: GameSpec, schedule: ScheduleConfig, horizon: u64, seed: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        let initial = LearnerState::initial(&game);
        Ok(Self {
            game,
            schedule,
            horizon,
            seed,
            initial,
            stride: 0,
            keep_records: false,
        })
    }

    pub fn with_initial(mut self, mu: DVector<f64>, lam: DVector<f64>) -> Result<Self> {
        self.initial = LearnerState::new(&self.game, mu, lam)?;
        Ok(self)
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_records(mut self, keep: bool) -> Self {
        self.keep_records = keep;
        self
    }
}

/// Thinned state after `t` completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: u64,
    pub mu: DVector<f64>,
    pub lam: DVector<f64>,
    /// `|max(0, g(a(t)))|` for the action played at step `t`.
    pub gnorm_pos: f64,
    pub values: ScheduleValues,
}

/// Invariant tracking over every step, not only the thinned ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub steps: u64,
    pub max_lam_norm: f64,
    /// Largest distance of any `mu(t)` outside `A`.
    pub max_box_violation: f64,
    /// Smallest dual component seen.
    pub min_lam: f64,
}

impl RunStats {
    fn new(initial: &LearnerState) -> Self {
        Self {
            steps: 0,
            max_lam_norm: initial.lam.norm(),
            max_box_violation: 0.0,
            min_lam: initial.lam.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn feasible(&self) -> bool {
        self.max_box_violation == 0.0 && !(self.min_lam < 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub seed: u64,
    pub initial: LearnerState,
    pub points: Vec<TracePoint>,
    pub records: Vec<IterationRecord>,
    pub stats: RunStats,
    pub final_state: LearnerState,
}

/// A failed run with everything recorded up to the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("run aborted after {} steps: {error}", partial.stats.steps)]
pub struct RunError {
    pub error: Error,
    pub partial: Trace,
}

/// `{1, 2, 5} x 10^k` together with `round(10^(k/20))`, up to `horizon`, sorted.
pub fn log_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 0_u32;
    loop {
        let v = libm::round(libm::pow(10.0, k as f64 / 20.0)) as u64;
        if v > horizon {
            break;
        }
        out.push(v);
        k += 1;
    }
    let mut decade = 1_u64;
    while decade <= horizon {
        for m in [1, 2, 5] {
            if m * decade <= horizon {
                out.push(m * decade);
            }
        }
        decade = match decade.checked_mul(10) {
            Some(d) => d,
            None => break,
        };
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Runs `horizon` steps. Deterministic in `cfg.seed`.
pub fn run(cfg: &RunConfig) -> core::result::Result<Trace, RunError> {
    let mut streams = PlayerStreams::new(cfg.seed, cfg.game.num_players());
    run_with_sampler(cfg, &mut streams)
}

pub fn run_with_sampler<S: QuerySampler + ?Sized>(
    cfg: &RunConfig,
    sampler: &mut S,
) -> core::result::Result<Trace, RunError> {
    let game = &cfg.game;
    let centers = shrink_centers(game);
    let grid = log_checkpoints(cfg.horizon);
    let mut next_grid = 0;
    let mut trace = Trace {
        seed: cfg.seed,
        initial: cfg.initial.clone(),
        points: Vec::with_capacity(grid.len() + 1),
        records: Vec::new(),
        stats: RunStats::new(&cfg.initial),
        final_state: cfg.initial.clone(),
    };
    let mut state = cfg.initial.clone();
    while state.t < cfg.horizon {
        let outcome = cfg
            .schedule
            .at(state.t + 1)
            .and_then(|v| step_inner(game, &centers, &state, cfg.schedule.mode(), v, sampler));
        let (next, record) = match outcome {
            Ok(x) => x,
            Err(error) => {
                trace.final_state = state;
                return Err(RunError {
                    error,
                    partial: trace,
                });
            }
        };
        state = next;
        let stats = &mut trace.stats;
        stats.steps = state.t;
        stats.max_lam_norm = stats.max_lam_norm.max(state.lam.norm());
        stats.max_box_violation = stats
            .max_box_violation
            .max(game.joint_set().violation(&state.mu));
        stats.min_lam = state.lam.iter().copied().fold(stats.min_lam, f64::min);

        let t = state.t;
        while next_grid < grid.len() && grid[next_grid] < t {
            next_grid += 1;
        }
        let on_grid = next_grid < grid.len() && grid[next_grid] == t;
        let on_stride = cfg.stride > 0 && t.is_multiple_of(cfg.stride);
        if on_grid || on_stride || t == cfg.horizon {
            trace.points.push(TracePoint {
                t,
                mu: state.mu.clone(),
                lam: state.lam.clone(),
                gnorm_pos: record.g_val.map(|v| v.max(0.0)).norm(),
                values: record.values,
            });
        }
        if cfg.keep_records {
            trace.records.push(record);
        }
    }
    trace.final_state = state;
    Ok(trace)
}

/// `mu` projected into `A` and `lam` clipped at zero, for building initial states.
pub fn feasible_initial(game: &GameSpec, mu: &DVector<f64>, lam: &DVector<f64>) -> Result<LearnerState> {
    check_dim("initial primal iterate", game.dim(), mu.len())?;
    LearnerState::new(game, project_box(game.joint_set(), mu), lam.map(|v| v.max(0.0)))
}

//! Power-law parameter schedules `gamma_t = G/t^g`, `eps_t = E/t^e`, `sigma_t = S/t^s`,
//! `rho_t = R/t^r`, and the preset exponent choices for one- and two-point feedback.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Default `delta` used by [`preset`] callers that have no better value.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Upper clamp applied to `rho_t` so the shrunk set stays nondegenerate.
pub const RHO_CAP: f64 = 0.5;

/// One payoff query per step, or an extra query at the mean point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackMode {
    OnePoint,
    TwoPoint,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::OnePoint => "one_point",
            FeedbackMode::TwoPoint => "two_point",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "one_point" | "one-point" | "1" => Some(FeedbackMode::OnePoint),
            "two_point" | "two-point" | "2" => Some(FeedbackMode::TwoPoint),
            _ => None,
        }
    }
}

impl core::fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decay exponents `(g, e, s, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub g: f64,
    pub e: f64,
    pub s: f64,
    pub r: f64,
}

/// Scale constants `(G, E, S, R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub gamma: f64,
    pub eps: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            eps: 1.0,
            sigma: 1.0,
            rho: 1.0,
        }
    }
}

/// Parameter values at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValues {
    pub gamma: f64,
    pub eps: f64,
    pub sigma: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    mode: FeedbackMode,
    constants: Constants,
    exponents: Exponents,
    delta: f64,
}

impl ScheduleConfig {
    /// Requires positive finite inputs, `s > r`, `g + e < 1` and `h - g > 0`.
    pub fn new(
        mode: FeedbackMode,
        constants: Constants,
        exponents: Exponents,
        delta: f64,
    ) -> Result<Self> {
        let named = [
            ("G", constants.gamma),
            ("E", constants.eps),
            ("S", constants.sigma),
            ("R", constants.rho),
            ("g", exponents.g),
            ("e", exponents.e),
            ("s", exponents.s),
            ("r", exponents.r),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("schedule parameter {name} must be positive, got {v}")));
            }
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(invalid(format!("delta must be nonnegative, got {delta}")));
        }
        let Exponents { g, e, s, r } = exponents;
        if s <= r {
            return Err(invalid(format!("need s > r, got s = {s}, r = {r}")));
        }
        if g + e >= 1.0 {
            return Err(invalid(format!("need g + e < 1, got {}", g + e)));
        }
        let h = h_exponent(mode, exponents);
        if h - g <= 0.0 {
            return Err(invalid(format!("need h - g > 0, got h = {h}, g = {g}")));
        }
        Ok(Self {
            mode,
            constants,
            exponents,
            delta,
        })
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn exponents(&self) -> Exponents {
        self.exponents
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_constants(self, constants: Constants) -> Result<Self> {
        Self::new(self.mode, constants, self.exponents, self.delta)
    }

    pub fn with_exponents(self, exponents: Exponents) -> Result<Self> {
        Self::new(self.mode, self.constants, exponents, self.delta)
    }

    /// Values at `t >= 1`, with `rho` capped at [`RHO_CAP`].
    pub fn at(&self, t: u64) -> Result<ScheduleValues> {
        schedule_at(self, t)
    }

    /// `h` as used in the convergence argument.
    pub fn h(&self) -> f64 {
        h_exponent(self.mode, self.exponents)
    }

    /// `h` with the `g + r` term in place of `g + 2r` for one-point feedback.
    pub fn h_alternative(&self) -> f64 {
        h_exponent_alternative(self.mode, self.exponents)
    }

    /// Exponent `p` of the guaranteed rate `E|mu(t) - a*|^2 = O(t^-p)`:
    /// `min(e, h - g)`, or `min(2e, h - g)` when the equilibrium is interior.
    pub fn predicted_exponent(&self, interior: bool) -> f64 {
        let e = if interior {
            2.0 * self.exponents.e
        } else {
            self.exponents.e
        };
        e.min(self.h() - self.exponents.g)
    }
}

pub fn schedule_at(cfg: &ScheduleConfig, t: u64) -> Result<ScheduleValues> {
    if t < 1 {
        return Err(invalid("schedules are defined for t >= 1"));
    }
    let tf = t as f64;
    let c = cfg.constants;
    let x = cfg.exponents;
    Ok(ScheduleValues {
        gamma: c.gamma / libm::pow(tf, x.g),
        eps: c.eps / libm::pow(tf, x.e),
        sigma: c.sigma / libm::pow(tf, x.s),
        rho: (c.rho / libm::pow(tf, x.r)).min(RHO_CAP),
    })
}

/// `h_1 = min(2-g-e, g+2r, 2g-2s)`, `h_2 = min(2-g-e, g+r, 2g)`.
pub fn h_exponent(mode: FeedbackMode, x: Exponents) -> f64 {
    let base = 2.0 - x.g - x.e;
    match mode {
        FeedbackMode::OnePoint => base.min(x.g + 2.0 * x.r).min(2.0 * x.g - 2.0 * x.s),
        FeedbackMode::TwoPoint => base.min(x.g + x.r).min(2.0 * x.g),
    }
}

pub fn h_exponent_alternative(mode: FeedbackMode, x: Exponents) -> f64 {
    match mode {
        FeedbackMode::OnePoint => (2.0 - x.g - x.e)
            .min(x.g + x.r)
            .min(2.0 * x.g - 2.0 * x.s),
        FeedbackMode::TwoPoint => h_exponent(mode, x),
    }
}

/// Exponents of the optimized schedules. `interior` selects the choice tuned for an
/// equilibrium in the interior of the action set.
pub fn preset_exponents(mode: FeedbackMode, interior: bool, delta: f64) -> Exponents {
    match (mode, interior) {
        (FeedbackMode::OnePoint, false) => Exponents {
            g: 0.75 + 0.5 * delta,
            e: 0.25 - delta,
            s: 0.25,
            r: 0.25 * (1.0 - delta),
        },
        (FeedbackMode::TwoPoint, false) => Exponents {
            g: 0.5,
            e: 0.5 - delta,
            s: 1.0,
            r: 1.0 - 0.5 * delta,
        },
        (FeedbackMode::OnePoint, true) => Exponents {
            g: 4.0 / 5.0,
            e: 2.0 / 15.0,
            s: 4.0 / 15.0,
            r: 4.0 / 15.0 - delta,
        },
        (FeedbackMode::TwoPoint, true) => Exponents {
            g: 4.0 / 7.0,
            e: 2.0 / 7.0,
            s: 2.0 / 7.0 + delta,
            r: 2.0 / 7.0,
        },
    }
}

/// Preset with unit constants. Requires `0 < delta < 0.1`.
pub fn preset(mode: FeedbackMode, interior: bool, delta: f64) -> Result<ScheduleConfig> {
    if !(delta > 0.0 && delta < 0.1) {
        return Err(invalid(format!("preset delta must lie in (0, 0.1), got {delta}")));
    }
    ScheduleConfig::new(
        mode,
        Constants::default(),
        preset_exponents(mode, interior, delta),
        delta,
    )
}

/// `sigma_t / rho_t` without the rho cap.
pub fn sigma_rho_ratio(cfg: &ScheduleConfig, t: u64) -> f64 {
    let tf = t.max(1) as f64;
    let c = cfg.constants;
    let x = cfg.exponents;
    (c.sigma / c.rho) * libm::pow(tf, x.r - x.s)
}

/// One series whose summability the boundedness argument needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityTerm {
    pub name: &'static str,
    /// The term behaves like `t^-exponent`.
    pub exponent: f64,
    pub summable: bool,
    /// `(T, sum_{t=2}^T term_t)` at each decade up to the horizon.
    pub partial_sums: Vec<(u64, f64)>,
    /// Ratio of the last two partial sums.
    pub growth_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityReport {
    pub terms: Vec<SummabilityTerm>,
}

impl SummabilityReport {
    pub fn all_summable(&self) -> bool {
        self.terms.iter().all(|t| t.summable)
    }
}

/// Partial sums of `(eps_t - eps_{t-1})^2/(gamma_t eps_t^3)`, `gamma_t rho_t`,
/// `gamma_t^2` and, for one-point feedback, `gamma_t^2/sigma_t^2`, for `t = 2..=horizon`.
///
/// A term is reported summable when its decay exponent exceeds one; the numerical
/// partial sums are diagnostics, since exponents close to one converge too slowly for
/// any finite horizon to show it.
pub fn summability_report(cfg: &ScheduleConfig, horizon: u64) -> SummabilityReport {
    let x = cfg.exponents;
    let c = cfg.constants;
    let pw = |scale: f64, exp: f64, t: f64| scale / libm::pow(t, exp);
    let mut specs: Vec<(&'static str, f64)> = alloc::vec![
        ("eps_drift", 2.0 - x.g - x.e),
        ("gamma_rho", x.g + x.r),
        ("gamma_sq", 2.0 * x.g),
    ];
    if cfg.mode == FeedbackMode::OnePoint {
        specs.push(("gamma_sq_over_sigma_sq", 2.0 * x.g - 2.0 * x.s));
    }
    let mut sums = alloc::vec![0.0_f64; specs.len()];
    let mut partial: Vec<Vec<(u64, f64)>> = alloc::vec![Vec::new(); specs.len()];
    let mut next_decade = 10_u64;
    for t in 2..=horizon.max(2) {
        let tf = t as f64;
        let gamma = pw(c.gamma, x.g, tf);
        let eps = pw(c.eps, x.e, tf);
        let eps_prev = pw(c.eps, x.e, tf - 1.0);
        let values = [
            (eps - eps_prev) * (eps - eps_prev) / (gamma * eps * eps * eps),
            gamma * pw(c.rho, x.r, tf),
            gamma * gamma,
            gamma * gamma / (pw(c.sigma, x.s, tf) * pw(c.sigma, x.s, tf)),
        ];
        for (k, s) in sums.iter_mut().enumerate() {
            *s += values[k];
        }
        if t == next_decade || t == horizon {
            for (k, p) in partial.iter_mut().enumerate() {
                p.push((t, sums[k]));
            }
            if t == next_decade {
                next_decade = next_decade.saturating_mul(10);
            }
        }
    }
    let terms = specs
        .into_iter()
        .zip(partial)
        .map(|((name, exponent), partial_sums)| {
            let growth_ratio = match partial_sums.len() {
                n if n >= 2 => partial_sums[n - 1].1 / partial_sums[n - 2].1,
                _ => f64::NAN,
            };
            SummabilityTerm {
                name,
                exponent,
                summable: exponent > 1.0,
                partial_sums,
                growth_ratio,
            }
        })
        .collect();
    SummabilityReport { terms }
}

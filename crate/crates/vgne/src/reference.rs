//! The equilibrium file written by `vgne oracle` and read back for distance columns.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vgne_core::oracle::{
    activity, check_regularization_bounds, solve_vgne, ConstantsMethod, ReferenceSolutions,
    RegularizationReport,
};
use vgne_core::{DVector, GameSpec};

use crate::config::{read_json, write_json};
use crate::error::{input, CliResult};

pub const REFERENCE_FILE: &str = "reference.json";

/// Regularization values checked alongside every reference computation.
pub const BOUND_EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Margin above which a constraint counts as inactive.
pub const INACTIVE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRecord {
    pub nu: f64,
    pub lip: f64,
    pub k_norm: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub coupling_slack: Vec<f64>,
    pub box_margin: Vec<f64>,
    pub min_margin: f64,
    pub all_inactive: bool,
    pub box_interior: bool,
    pub active_coupling_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsBoundRecord {
    pub eps: f64,
    pub primal_gap: f64,
    pub dual_gap: f64,
    pub squared_bound: f64,
    pub intermediate_bound: f64,
    pub squared_ok: bool,
    pub dual_ok: bool,
    pub linear_bound: Option<f64>,
    pub linear_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub eps_prev: f64,
    pub eps: f64,
    pub primal_ratio: f64,
    pub dual_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationRecord {
    pub bounds: Vec<EpsBoundRecord>,
    pub drift: Vec<DriftRecord>,
    pub slack: f64,
    pub interior: bool,
    pub all_pass: bool,
    pub drift_bounded: bool,
}

impl From<&RegularizationReport> for RegularizationRecord {
    fn from(r: &RegularizationReport) -> Self {
        Self {
            bounds: r
                .bounds
                .iter()
                .map(|b| EpsBoundRecord {
                    eps: b.eps,
                    primal_gap: b.primal_gap,
                    dual_gap: b.dual_gap,
                    squared_bound: b.squared_bound,
                    intermediate_bound: b.intermediate_bound,
                    squared_ok: b.squared_ok,
                    dual_ok: b.dual_ok,
                    linear_bound: b.linear_bound,
                    linear_ok: b.linear_ok,
                })
                .collect(),
            drift: r
                .drift
                .iter()
                .map(|d| DriftRecord {
                    eps_prev: d.eps_prev,
                    eps: d.eps,
                    primal_ratio: d.primal_ratio,
                    dual_ratio: d.dual_ratio,
                })
                .collect(),
            slack: r.slack,
            interior: r.interior,
            all_pass: r.all_pass(),
            drift_bounded: r.drift_bounded(DRIFT_FLOOR),
        }
    }
}

/// Drift ratios below this are solver noise and ignored.
pub const DRIFT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub game: String,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub method: String,
    pub residual: f64,
    pub tol: f64,
    pub method_gap: Option<f64>,
    pub path_stability: f64,
    pub constants: ConstantsRecord,
    pub activity: ActivityRecord,
    pub regularization: RegularizationRecord,
}

impl ReferenceFile {
    pub fn primal_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.primal)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }

    /// Checks that the file belongs to a game of matching dimensions.
    pub fn check_game(&self, game: &GameSpec) -> CliResult<()> {
        if self.primal.len() != game.dim() || self.dual.len() != game.num_constraints() {
            return Err(input("reference file dimensions do not match the game"));
        }
        Ok(())
    }
}

/// Equilibrium, constants, constraint activity and regularization report of `game`.
pub fn compute_reference(
    name: &str,
    game: &GameSpec,
    tol: f64,
) -> CliResult<(ReferenceFile, ReferenceSolutions, RegularizationReport)> {
    let sol = solve_vgne(game, tol)?;
    let report = check_regularization_bounds(game, &sol, &BOUND_EPS, tol)?;
    let act = activity(game, &sol.primal)?;
    let c = sol.constants;
    let file = ReferenceFile {
        game: name.to_string(),
        primal: sol.primal.iter().copied().collect(),
        dual: sol.dual.iter().copied().collect(),
        method: sol.method.to_string(),
        residual: sol.residual,
        tol,
        method_gap: sol.method_gap,
        path_stability: sol.path_stability,
        constants: ConstantsRecord {
            nu: c.nu,
            lip: c.lip,
            k_norm: c.k_norm,
            method: match c.method {
                ConstantsMethod::Jacobian => "jacobian",
                ConstantsMethod::Sampled => "sampled",
            }
            .to_string(),
        },
        activity: ActivityRecord {
            coupling_slack: act.coupling_slack.iter().copied().collect(),
            box_margin: act.box_margin.iter().copied().collect(),
            min_margin: act.min_margin,
            all_inactive: act.all_inactive(INACTIVE_MARGIN),
            box_interior: act.box_interior(INACTIVE_MARGIN),
            active_coupling_rows: act.active_coupling(INACTIVE_MARGIN),
        },
        regularization: RegularizationRecord::from(&report),
    };
    Ok((file, sol, report))
}

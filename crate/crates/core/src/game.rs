//! Games with box-constrained players and an affine shared constraint `K a <= l`.
//!
//! A [`GameSpec`] bundles the local action sets, one cost oracle per player and the
//! coupling data. Evaluations cover the individual costs, the constraint function, the
//! pseudo-gradient `M(a)` (stacked partial gradients of each player's own cost), and the
//! pseudo-gradient of the augmented game in which a virtual dual player holds the
//! multiplier `lam >= 0`:
//!
//! ```text
//! W(a, lam)     = [ M(a) + K^T lam ; l - K a ]
//! W_eps(a, lam) = W(a, lam) + [ 0 ; eps * lam ]
//! ```

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Error, Result};

/// Axis-aligned box `{x : lower <= x <= upper}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim("box upper bound", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(invalid("box must have at least one coordinate"));
        }
        for k in 0..lower.len() {
            let (lo, hi) = (lower[k], upper[k]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!("box coordinate {k} is unbounded")));
            }
            if lo > hi {
                return Err(invalid(format!(
                    "box coordinate {k} has lower {lo} above upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(dim, lo),
            DVector::from_element(dim, hi),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn midpoint(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn max_width(&self) -> f64 {
        (&self.upper - &self.lower).max()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// True when `other` lies inside `self` up to `tol`.
    pub fn contains_box(&self, other: &BoxSet, tol: f64) -> bool {
        self.contains(other.lower(), tol) && self.contains(other.upper(), tol)
    }

    /// Largest componentwise distance from `x` to the box.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// A player's cost `J^i : R^D -> R`.
///
/// Implementations must be deterministic. When `block_gradient` returns `None` the
/// pseudo-gradient falls back to central finite differences.
pub trait CostOracle: Send + Sync + fmt::Debug {
    fn cost(&self, a: &DVector<f64>) -> f64;

    /// Gradient of the cost with respect to the coordinates in `block`.
    fn block_gradient(&self, _a: &DVector<f64>, _block: Range<usize>) -> Option<DVector<f64>> {
        None
    }

    /// True when the cost is a quadratic form, so its gradient is affine.
    fn is_quadratic(&self) -> bool {
        false
    }

    /// The coefficients, for costs that are quadratic forms.
    fn as_quadratic(&self) -> Option<&QuadraticCost> {
        None
    }
}

/// `J(a) = 1/2 a^T H a + c^T a + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl QuadraticCost {
    /// `hessian` is symmetrized; only its symmetric part affects the cost.
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Result<Self> {
        if !hessian.is_square() {
            return Err(invalid("quadratic cost matrix must be square"));
        }
        check_dim("quadratic cost linear term", hessian.nrows(), linear.len())?;
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        Ok(Self {
            hessian,
            linear,
            constant,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            hessian: DMatrix::zeros(dim, dim),
            linear: DVector::zeros(dim),
            constant: 0.0,
        }
    }

    /// Sum of weighted squares `1/2 sum_k w_k (v_k^T a + b_k)^2`.
    pub fn from_squares(dim: usize, terms: &[(f64, DVector<f64>, f64)]) -> Result<Self> {
        let mut hessian = DMatrix::zeros(dim, dim);
        let mut linear = DVector::zeros(dim);
        let mut constant = 0.0;
        for (w, v, b) in terms {
            check_dim("square term direction", dim, v.len())?;
            hessian += v * v.transpose() * *w;
            linear += v * (*w * *b);
            constant += 0.5 * w * b * b;
        }
        Ok(Self {
            hessian,
            linear,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }
}

impl CostOracle for QuadraticCost {
    fn cost(&self, a: &DVector<f64>) -> f64 {
        0.5 * a.dot(&(&self.hessian * a)) + self.linear.dot(a) + self.constant
    }

    fn block_gradient(&self, a: &DVector<f64>, block: Range<usize>) -> Option<DVector<f64>> {
        let rows = self.hessian.rows(block.start, block.len());
        Some(rows * a + self.linear.rows(block.start, block.len()))
    }

    fn is_quadratic(&self) -> bool {
        true
    }

    fn as_quadratic(&self) -> Option<&QuadraticCost> {
        Some(self)
    }
}

/// Cost given by a plain function; gradients come from finite differences.
pub struct FnCost<F>(pub F);

impl<F> fmt::Debug for FnCost<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnCost")
    }
}

impl<F> CostOracle for FnCost<F>
where
    F: Fn(&DVector<f64>) -> f64 + Send + Sync,
{
    fn cost(&self, a: &DVector<f64>) -> f64 {
        (self.0)(a)
    }
}

/// Primal-dual point `[a, lam]` of the augmented game, with `lam >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPoint {
    primal: DVector<f64>,
    dual: DVector<f64>,
}

impl AugmentedPoint {
    pub fn new(primal: DVector<f64>, dual: DVector<f64>) -> Result<Self> {
        check_nonneg(&dual)?;
        Ok(Self { primal, dual })
    }

    pub fn primal(&self) -> &DVector<f64> {
        &self.primal
    }

    pub fn dual(&self) -> &DVector<f64> {
        &self.dual
    }

    /// Stacked `[a; lam]`.
    pub fn stacked(&self) -> DVector<f64> {
        let d = self.primal.len();
        let mut z = DVector::zeros(d + self.dual.len());
        z.rows_mut(0, d).copy_from(&self.primal);
        z.rows_mut(d, self.dual.len()).copy_from(&self.dual);
        z
    }

    pub fn into_parts(self) -> (DVector<f64>, DVector<f64>) {
        (self.primal, self.dual)
    }
}

pub(crate) fn check_nonneg(dual: &DVector<f64>) -> Result<()> {
    match dual.iter().position(|v| !(*v >= 0.0)) {
        Some(index) => Err(Error::NegativeDual {
            index,
            value: dual[index],
        }),
        None => Ok(()),
    }
}

/// The game: N players with box action sets, costs and the shared constraint `K a <= l`.
#[derive(Debug, Clone)]
pub struct GameSpec {
    local_sets: Vec<BoxSet>,
    costs: Vec<Arc<dyn CostOracle>>,
    coupling_matrix: DMatrix<f64>,
    coupling_offset: DVector<f64>,
    block_starts: Vec<usize>,
    joint_set: BoxSet,
}

impl GameSpec {
    /// Validates dimensions and checks that `{a in A : K a <= l}` is nonempty.
    pub fn new(
        local_sets: Vec<BoxSet>,
        costs: Vec<Arc<dyn CostOracle>>,
        coupling_matrix: DMatrix<f64>,
        coupling_offset: DVector<f64>,
    ) -> Result<Self> {
        if local_sets.is_empty() {
            return Err(invalid("a game needs at least one player"));
        }
        check_dim("number of cost oracles", local_sets.len(), costs.len())?;
        let mut block_starts = Vec::with_capacity(local_sets.len());
        let mut total = 0;
        for set in &local_sets {
            block_starts.push(total);
            total += set.dim();
        }
        check_dim("coupling matrix columns", total, coupling_matrix.ncols())?;
        for cost in &costs {
            if let Some(q) = cost.as_quadratic() {
                check_dim("quadratic cost dimension", total, q.dim())?;
            }
        }
        check_dim(
            "coupling offset",
            coupling_matrix.nrows(),
            coupling_offset.len(),
        )?;
        if coupling_matrix.iter().chain(coupling_offset.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("coupling data must be finite"));
        }
        let mut lower = DVector::zeros(total);
        let mut upper = DVector::zeros(total);
        for (set, start) in local_sets.iter().zip(&block_starts) {
            lower.rows_mut(*start, set.dim()).copy_from(set.lower());
            upper.rows_mut(*start, set.dim()).copy_from(set.upper());
        }
        let joint_set = BoxSet::new(lower, upper)?;
        let game = Self {
            local_sets,
            costs,
            coupling_matrix,
            coupling_offset,
            block_starts,
            joint_set,
        };
        let violation = game.min_coupling_violation();
        if violation > 1e-7 {
            return Err(Error::Infeasible { violation });
        }
        Ok(game)
    }

    pub fn num_players(&self) -> usize {
        self.local_sets.len()
    }

    /// Total action dimension `D`.
    pub fn dim(&self) -> usize {
        self.joint_set.dim()
    }

    /// Number of coupling constraints `n`.
    pub fn num_constraints(&self) -> usize {
        self.coupling_matrix.nrows()
    }

    pub fn player_dim(&self, player: usize) -> usize {
        self.local_sets[player].dim()
    }

    /// Coordinates of player `player` inside the joint action.
    pub fn block(&self, player: usize) -> Range<usize> {
        let start = self.block_starts[player];
        start..start + self.local_sets[player].dim()
    }

    pub fn local_set(&self, player: usize) -> &BoxSet {
        &self.local_sets[player]
    }

    pub fn local_sets(&self) -> &[BoxSet] {
        &self.local_sets
    }

    /// `A = A^1 x ... x A^N` as one box.
    pub fn joint_set(&self) -> &BoxSet {
        &self.joint_set
    }

    pub fn cost_oracle(&self, player: usize) -> &Arc<dyn CostOracle> {
        &self.costs[player]
    }

    pub fn coupling_matrix(&self) -> &DMatrix<f64> {
        &self.coupling_matrix
    }

    pub fn coupling_offset(&self) -> &DVector<f64> {
        &self.coupling_offset
    }

    /// True when every cost is quadratic, i.e. `M` is affine.
    pub fn has_affine_pseudo_gradient(&self) -> bool {
        self.costs.iter().all(|c| c.is_quadratic())
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player < self.num_players() {
            Ok(())
        } else {
            Err(invalid(format!(
                "player index {player} out of range (N = {})",
                self.num_players()
            )))
        }
    }

    /// `J^i(a)`.
    pub fn eval_cost(&self, player: usize, a: &DVector<f64>) -> Result<f64> {
        self.check_player(player)?;
        check_dim("joint action", self.dim(), a.len())?;
        Ok(self.costs[player].cost(a))
    }

    /// `g(a) = K a - l`.
    pub fn eval_constraint(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("joint action", self.dim(), a.len())?;
        Ok(self.constraint_unchecked(a))
    }

    pub(crate) fn constraint_unchecked(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.coupling_matrix * a - &self.coupling_offset
    }

    /// `M(a)`: analytic block gradients when offered, central differences otherwise.
    pub fn eval_pseudo_gradient(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("joint action", self.dim(), a.len())?;
        let mut out = DVector::zeros(self.dim());
        for player in 0..self.num_players() {
            let block = self.block(player);
            let grad = match self.costs[player].block_gradient(a, block.clone()) {
                Some(g) => {
                    check_dim("block gradient", block.len(), g.len())?;
                    g
                }
                None => self.fd_block_gradient(player, a),
            };
            out.rows_mut(block.start, block.len()).copy_from(&grad);
        }
        Ok(out)
    }

    /// Central-difference gradient of `J^i` over its own block, step `1e-6 * max(1, |a|)`.
    pub fn fd_block_gradient(&self, player: usize, a: &DVector<f64>) -> DVector<f64> {
        let block = self.block(player);
        let h = 1e-6 * a.norm().max(1.0);
        let cost = &self.costs[player];
        let mut probe = a.clone();
        let mut grad = DVector::zeros(block.len());
        for (j, k) in block.enumerate() {
            let orig = probe[k];
            probe[k] = orig + h;
            let up = cost.cost(&probe);
            probe[k] = orig - h;
            let down = cost.cost(&probe);
            probe[k] = orig;
            grad[j] = (up - down) / (2.0 * h);
        }
        grad
    }

    /// `W(a, lam) = [M(a) + K^T lam ; l - K a]`.
    pub fn eval_augmented_pg(&self, p: &AugmentedPoint) -> Result<DVector<f64>> {
        check_dim("dual variable", self.num_constraints(), p.dual().len())?;
        let m = self.eval_pseudo_gradient(p.primal())?;
        let d = self.dim();
        let n = self.num_constraints();
        let mut out = DVector::zeros(d + n);
        out.rows_mut(0, d)
            .copy_from(&(m + self.coupling_matrix.tr_mul(p.dual())));
        out.rows_mut(d, n)
            .copy_from(&(-self.constraint_unchecked(p.primal())));
        Ok(out)
    }

    /// `W_eps(a, lam) = W(a, lam) + [0 ; eps lam]`.
    pub fn eval_regularized_pg(&self, p: &AugmentedPoint, eps: f64) -> Result<DVector<f64>> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(invalid(format!("regularization must be >= 0, got {eps}")));
        }
        let mut w = self.eval_augmented_pg(p)?;
        let d = self.dim();
        for (j, lam) in p.dual().iter().enumerate() {
            w[d + j] += eps * lam;
        }
        Ok(w)
    }

    /// Primal block of `W`: `M(a) + K^T lam`.
    pub fn eval_primal_pg(&self, a: &DVector<f64>, lam: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("dual variable", self.num_constraints(), lam.len())?;
        Ok(self.eval_pseudo_gradient(a)? + self.coupling_matrix.tr_mul(lam))
    }

    /// Local Lagrangian `U^i(a, lam) = J^i(a) + <lam, K a - l>`.
    pub fn lagrangian(&self, player: usize, a: &DVector<f64>, lam: &DVector<f64>) -> Result<f64> {
        check_dim("dual variable", self.num_constraints(), lam.len())?;
        check_nonneg(lam)?;
        let j = self.eval_cost(player, a)?;
        Ok(j + lam.dot(&self.constraint_unchecked(a)))
    }

    /// All players' Lagrangians at once, reusing one constraint evaluation.
    pub(crate) fn lagrangians_unchecked(&self, a: &DVector<f64>, lam: &DVector<f64>) -> Vec<f64> {
        let penalty = lam.dot(&self.constraint_unchecked(a));
        self.costs.iter().map(|c| c.cost(a) + penalty).collect()
    }

    /// Smallest achievable `max_j (K a - l)_j^+` over `a in A`, by projected gradient on
    /// `1/2 |max(0, K a - l)|^2`.
    fn min_coupling_violation(&self) -> f64 {
        let k = &self.coupling_matrix;
        if k.nrows() == 0 {
            return 0.0;
        }
        let violation = |a: &DVector<f64>| {
            self.constraint_unchecked(a)
                .iter()
                .fold(0.0_f64, |m, v| m.max(*v))
        };
        let norm = crate::oracle::spectral_norm(k);
        let norm_sq = norm * norm;
        if norm_sq == 0.0 {
            return violation(&self.joint_set.midpoint());
        }
        let step = 1.0 / norm_sq;
        let mut a = self.joint_set.midpoint();
        let mut best = violation(&a);
        for _ in 0..20_000 {
            if best <= 1e-12 {
                break;
            }
            let excess = self.constraint_unchecked(&a).map(|v| v.max(0.0));
            a -= k.tr_mul(&excess) * step;
            crate::geometry::project_box_in_place(&self.joint_set, &mut a);
            best = best.min(violation(&a));
        }
        best
    }
}

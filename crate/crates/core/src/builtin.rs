//! Built-in games.
//!
//! The two-player control game: player `i` steers two scalar states
//! `s_j = s0_j + a^1_j + a^2_j` toward its targets `sbar^i_j` with cost
//!
//! ```text
//! J^i(a) = 1/2 [ q^i_1 (s_1 - sbar^i_1)^2 + q^i_2 (s_2 - sbar^i_2)^2
//!              + r^i (a^i_1)^2 + r^i (a^i_2)^2 + r^i (a^i_1 + a^i_2 - o^i)^2 ]
//! ```
//!
//! over `0 <= a^i_j <= amax^i`, with the shared limits `a^1_j + a^2_j <= c_j`. The joint
//! action is ordered `(a^1_1, a^1_2, a^2_1, a^2_2)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::game::{BoxSet, CostOracle, GameSpec, QuadraticCost};

/// Coefficients of the two-player control game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGameParams {
    pub q: [[f64; 2]; 2],
    pub s_bar: [[f64; 2]; 2],
    pub r: [f64; 2],
    /// Target `o^i` of each player's total input.
    pub offset: [f64; 2],
    pub a_max: [f64; 2],
    pub s0: [f64; 2],
    pub c: [f64; 2],
}

impl ControlGameParams {
    /// Both input bounds at one; the equilibrium is interior and no constraint binds.
    pub fn case1() -> Self {
        Self {
            q: [[5.0, 3.0], [1.0, 5.0]],
            s_bar: [[1.0, 2.0 / 3.0], [2.0 / 3.0, 0.8]],
            r: [1.0, 1.0],
            offset: [1.0, 1.0],
            a_max: [1.0, 1.0],
            s0: [1.0 / 3.0, 1.0 / 3.0],
            c: [2.0 / 3.0, 5.0 / 3.0],
        }
    }

    /// Player 1's inputs capped at 0.3, which binds at the equilibrium.
    pub fn case2() -> Self {
        let mut p = Self::case1();
        p.a_max = [0.3, 1.0];
        p.offset = p.a_max;
        p
    }

    /// The first coupling limit lowered to 0.6 so that it binds while the equilibrium
    /// stays inside the input box.
    pub fn coupled_active() -> Self {
        let mut p = Self::case1();
        p.c = [0.6, 5.0 / 3.0];
        p
    }

    /// Alternative coefficients `r = (2, 1)`, `sbar^2_2 = 2/3`, both offsets equal to
    /// `amax^1`. Its equilibrium differs from that of [`Self::case1`]; kept for comparison.
    pub fn literal(case2: bool) -> Self {
        let a_max = if case2 { [0.3, 1.0] } else { [1.0, 1.0] };
        Self {
            q: [[5.0, 3.0], [1.0, 5.0]],
            s_bar: [[1.0, 2.0 / 3.0], [2.0 / 3.0, 2.0 / 3.0]],
            r: [2.0, 1.0],
            offset: [a_max[0], a_max[0]],
            a_max,
            s0: [1.0 / 3.0, 1.0 / 3.0],
            c: [2.0 / 3.0, 5.0 / 3.0],
        }
    }

    pub fn cost(&self, player: usize) -> Result<QuadraticCost> {
        let e = |k: usize| {
            let mut v = DVector::zeros(4);
            v[k] = 1.0;
            v
        };
        let (x1, x2) = (2 * player, 2 * player + 1);
        let mut terms = Vec::with_capacity(5);
        for j in 0..2 {
            terms.push((
                self.q[player][j],
                e(j) + e(2 + j),
                self.s0[j] - self.s_bar[player][j],
            ));
        }
        let r = self.r[player];
        terms.push((r, e(x1), 0.0));
        terms.push((r, e(x2), 0.0));
        terms.push((r, e(x1) + e(x2), -self.offset[player]));
        QuadraticCost::from_squares(4, &terms)
    }

    pub fn build(&self) -> Result<GameSpec> {
        let sets = vec![
            BoxSet::uniform(2, 0.0, self.a_max[0])?,
            BoxSet::uniform(2, 0.0, self.a_max[1])?,
        ];
        let costs: Vec<Arc<dyn CostOracle>> = vec![Arc::new(self.cost(0)?), Arc::new(self.cost(1)?)];
        let k = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        GameSpec::new(sets, costs, k, DVector::from_column_slice(&self.c))
    }
}

/// Two players with separable costs `1/2 |a^i - target^i|^2` and a zero coupling row.
/// The equilibrium is the targets clamped to `[0, 1]^2`, i.e. `(0.3, 1, 0, 0.6)`.
pub fn uncoupled_quadratic() -> Result<GameSpec> {
    let targets = [[0.3, 1.5], [-0.2, 0.6]];
    let mut costs: Vec<Arc<dyn CostOracle>> = Vec::new();
    for (i, tgt) in targets.iter().enumerate() {
        let mut terms = Vec::new();
        for (j, t) in tgt.iter().enumerate() {
            let mut v = DVector::zeros(4);
            v[2 * i + j] = 1.0;
            terms.push((1.0, v, -t));
        }
        costs.push(Arc::new(QuadraticCost::from_squares(4, &terms)?));
    }
    GameSpec::new(
        vec![BoxSet::uniform(2, 0.0, 1.0)?, BoxSet::uniform(2, 0.0, 1.0)?],
        costs,
        DMatrix::zeros(1, 4),
        DVector::from_element(1, 1.0),
    )
}

/// Two scalar players with `M(a) = (a_1 + 3 a_2, 3 a_1 - a_2)`, whose symmetric part is
/// indefinite.
pub fn nonmonotone_test() -> Result<GameSpec> {
    let h1 = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 0.0]);
    let h2 = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, -1.0]);
    GameSpec::new(
        vec![BoxSet::uniform(1, -1.0, 1.0)?, BoxSet::uniform(1, -1.0, 1.0)?],
        vec![
            Arc::new(QuadraticCost::new(h1, DVector::zeros(2), 0.0)?),
            Arc::new(QuadraticCost::new(h2, DVector::zeros(2), 0.0)?),
        ],
        DMatrix::zeros(0, 2),
        DVector::zeros(0),
    )
}

pub const BUILTIN_NAMES: [&str; 7] = [
    "control-case1",
    "control-case2",
    "coupled-active",
    "control-literal-case1",
    "control-literal-case2",
    "uncoupled-quadratic",
    "nonmonotone-test",
];

/// Looks up a built-in game; `None` for an unknown name.
pub fn builtin(name: &str) -> Option<Result<GameSpec>> {
    Some(match name {
        "control-case1" => ControlGameParams::case1().build(),
        "control-case2" => ControlGameParams::case2().build(),
        "coupled-active" => ControlGameParams::coupled_active().build(),
        "control-literal-case1" => ControlGameParams::literal(false).build(),
        "control-literal-case2" => ControlGameParams::literal(true).build(),
        "uncoupled-quadratic" => uncoupled_quadratic(),
        "nonmonotone-test" => nonmonotone_test(),
        _ => return None,
    })
}

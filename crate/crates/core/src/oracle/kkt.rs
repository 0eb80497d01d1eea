//! Active-set enumeration of the KKT system for games with an affine pseudo-gradient.
//!
//! With `M(a) = G a + b`, a point `a` with multiplier `lam` is a v-GNE iff, for some
//! assignment of every coordinate to {free, at lower bound, at upper bound} and every
//! coupling row to {active, inactive}:
//!
//! ```text
//! (G a + b + K^T lam)_k = 0      k free
//! a_k = lower_k (upper_k)        k at a bound, with the same expression >= 0 (<= 0)
//! (K a)_j = l_j, lam_j >= 0      j active
//! lam_j = 0, (K a)_j <= l_j      j inactive
//! ```
//!
//! Every assignment yields a square linear system; the feasible solutions are kept and the
//! one with the smallest multiplier norm is returned.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::constants::jacobian;
use crate::error::{invalid, Result};
use crate::game::GameSpec;

/// Largest `n + 2 * (number of non-degenerate coordinates)` accepted.
pub const MAX_KKT_CHOICES: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub primal: DVector<f64>,
    pub dual: DVector<f64>,
    /// Assignments examined.
    pub combinations: usize,
    /// Assignments whose solution satisfied every sign and feasibility condition.
    pub candidates: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Coord {
    Free,
    Lower,
    Upper,
}

/// Errors when `M` is not affine or the enumeration would be too large.
pub fn solve_kkt(game: &GameSpec) -> Result<KktSolution> {
    if !game.has_affine_pseudo_gradient() {
        return Err(invalid("active-set enumeration needs an affine pseudo-gradient"));
    }
    let d = game.dim();
    let n = game.num_constraints();
    let set = game.joint_set();
    let lower = set.lower();
    let upper = set.upper();
    let movable: Vec<usize> = (0..d).filter(|&k| lower[k] < upper[k]).collect();
    let choices = n + 2 * movable.len();
    if choices > MAX_KKT_CHOICES {
        return Err(invalid(format!(
            "active-set enumeration over {choices} binary choices exceeds the cap of {MAX_KKT_CHOICES}"
        )));
    }
    let mid = set.midpoint();
    let g = jacobian(game, &mid, 1.0)?;
    let b = game.eval_pseudo_gradient(&mid)? - &g * &mid;
    let k = game.coupling_matrix();
    let l = game.coupling_offset();
    let scale = 1.0 + b.amax() + l.amax() + g.amax() + k.amax();
    let tol = 1e-9 * scale;

    let mut coords = alloc::vec![Coord::Lower; d];
    let total_coord = 3_usize.pow(movable.len() as u32);
    let total_rows = 1_usize << n;
    let mut best: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut candidates = 0;
    let mut combinations = 0;

    for code in 0..total_coord {
        let mut c = code;
        for &m in &movable {
            coords[m] = match c % 3 {
                0 => Coord::Free,
                1 => Coord::Lower,
                _ => Coord::Upper,
            };
            c /= 3;
        }
        let free: Vec<usize> = movable
            .iter()
            .copied()
            .filter(|&m| coords[m] == Coord::Free)
            .collect();
        let mut fixed = DVector::zeros(d);
        for kk in 0..d {
            fixed[kk] = match coords[kk] {
                Coord::Upper if lower[kk] < upper[kk] => upper[kk],
                _ => lower[kk],
            };
        }
        for k_free in &free {
            fixed[*k_free] = 0.0;
        }
        for mask in 0..total_rows {
            combinations += 1;
            let active: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
            if let Some((a, lam)) = solve_assignment(&g, &b, k, l, &free, &active, &fixed) {
                if check_candidate(&g, &b, k, l, &coords, lower, upper, &free, &active, &a, &lam, tol) {
                    candidates += 1;
                    let better = match &best {
                        Some((_, bl)) => lam.norm() < bl.norm(),
                        None => true,
                    };
                    if better {
                        best = Some((a, lam));
                    }
                }
            }
        }
    }
    match best {
        Some((mut a, lam)) => {
            crate::geometry::project_box_in_place(set, &mut a);
            Ok(KktSolution {
                primal: a,
                dual: lam.map(|v| v.max(0.0)),
                combinations,
                candidates,
            })
        }
        None => Err(invalid("active-set enumeration found no KKT point")),
    }
}

fn solve_assignment(
    g: &DMatrix<f64>,
    b: &DVector<f64>,
    k: &DMatrix<f64>,
    l: &DVector<f64>,
    free: &[usize],
    active: &[usize],
    fixed: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let nf = free.len();
    let na = active.len();
    let size = nf + na;
    let mut a = fixed.clone();
    let mut lam = DVector::zeros(l.len());
    if size == 0 {
        return Some((a, lam));
    }
    let mut sys = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    let base_grad = g * fixed + b;
    let base_con = k * fixed - l;
    for (r, &kf) in free.iter().enumerate() {
        for (c, &jf) in free.iter().enumerate() {
            sys[(r, c)] = g[(kf, jf)];
        }
        for (c, &ja) in active.iter().enumerate() {
            sys[(r, nf + c)] = k[(ja, kf)];
        }
        rhs[r] = -base_grad[kf];
    }
    for (r, &ja) in active.iter().enumerate() {
        for (c, &jf) in free.iter().enumerate() {
            sys[(nf + r, c)] = k[(ja, jf)];
        }
        rhs[nf + r] = -base_con[ja];
    }
    let svd = sys.clone().svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(1e-300);
    let x = svd.solve(&rhs, cutoff).ok()?;
    let resid = (&sys * &x - &rhs).norm();
    if !(resid <= 1e-9 * (1.0 + rhs.norm())) {
        return None;
    }
    for (c, &kf) in free.iter().enumerate() {
        a[kf] = x[c];
    }
    for (c, &ja) in active.iter().enumerate() {
        lam[ja] = x[nf + c];
    }
    Some((a, lam))
}

#[allow(clippy::too_many_arguments)]
fn check_candidate(
    g: &DMatrix<f64>,
    b: &DVector<f64>,
    k: &DMatrix<f64>,
    l: &DVector<f64>,
    coords: &[Coord],
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    free: &[usize],
    active: &[usize],
    a: &DVector<f64>,
    lam: &DVector<f64>,
    tol: f64,
) -> bool {
    for &kf in free {
        if a[kf] < lower[kf] - tol || a[kf] > upper[kf] + tol {
            return false;
        }
    }
    let con = k * a - l;
    for j in 0..l.len() {
        if active.contains(&j) {
            if lam[j] < -tol {
                return false;
            }
        } else if con[j] > tol {
            return false;
        }
    }
    let v = g * a + b + k.tr_mul(lam);
    for kk in 0..a.len() {
        if lower[kk] == upper[kk] {
            continue;
        }
        let ok = match coords[kk] {
            Coord::Free => true,
            Coord::Lower => v[kk] >= -tol,
            Coord::Upper => v[kk] <= tol,
        };
        if !ok {
            return false;
        }
    }
    true
}

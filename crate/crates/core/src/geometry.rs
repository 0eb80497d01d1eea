//! Euclidean projections onto boxes, the nonnegative orthant and shrunk boxes.

use alloc::format;

use nalgebra::DVector;

use crate::error::{check_dim, invalid, Result};
use crate::game::BoxSet;

/// Componentwise clamp of `x` into `b`.
pub fn project_box(b: &BoxSet, x: &DVector<f64>) -> DVector<f64> {
    let mut y = x.clone();
    project_box_in_place(b, &mut y);
    y
}

pub fn project_box_in_place(b: &BoxSet, x: &mut DVector<f64>) {
    assert_eq!(b.dim(), x.len(), "box and point dimensions differ");
    for ((v, lo), hi) in x.iter_mut().zip(b.lower().iter()).zip(b.upper().iter()) {
        *v = v.clamp(*lo, *hi);
    }
}

/// `max(x, 0)` componentwise.
pub fn project_nonneg(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| v.max(0.0))
}

pub fn project_nonneg_in_place(x: &mut DVector<f64>) {
    x.apply(|v| *v = v.max(0.0));
}

/// The box `center + (1 - rho)(b - center)`.
pub fn shrink(b: &BoxSet, rho: f64, center: &DVector<f64>) -> Result<BoxSet> {
    check_dim("shrink center", b.dim(), center.len())?;
    if !(0.0..1.0).contains(&rho) {
        return Err(invalid(format!("shrink factor must lie in [0, 1), got {rho}")));
    }
    if !b.contains(center, 0.0) {
        return Err(invalid("shrink center must lie inside the box"));
    }
    let scale = 1.0 - rho;
    let lower = center + (b.lower() - center) * scale;
    let upper = center + (b.upper() - center) * scale;
    BoxSet::new(lower, upper)
}

/// Origin when the box contains it, midpoint otherwise.
pub fn default_shrink_center(b: &BoxSet) -> DVector<f64> {
    let origin = DVector::zeros(b.dim());
    if b.contains(&origin, 0.0) {
        origin
    } else {
        b.midpoint()
    }
}

/// A box scaled by `1 - rho` about a fixed center.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkBox {
    base: BoxSet,
    rho: f64,
    center: DVector<f64>,
    shrunk: BoxSet,
}

impl ShrunkBox {
    pub fn new(base: BoxSet, rho: f64, center: DVector<f64>) -> Result<Self> {
        let shrunk = shrink(&base, rho, &center)?;
        if !base.contains_box(&shrunk, 1e-12) {
            return Err(invalid("shrunk box escapes its base"));
        }
        Ok(Self {
            base,
            rho,
            center,
            shrunk,
        })
    }

    /// Uses [`default_shrink_center`].
    pub fn about_default_center(base: BoxSet, rho: f64) -> Result<Self> {
        let center = default_shrink_center(&base);
        Self::new(base, rho, center)
    }

    pub fn base(&self) -> &BoxSet {
        &self.base
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shrunk(&self) -> &BoxSet {
        &self.shrunk
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        project_box(&self.shrunk, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square() -> BoxSet {
        BoxSet::uniform(2, 0.0, 1.0).unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn clamp_examples() {
        let b = unit_square();
        assert_eq!(project_box(&b, &v(&[2.0, -1.0])), v(&[1.0, 0.0]));
        let inside = v(&[0.25, 0.75]);
        assert_eq!(project_box(&b, &inside), inside);
    }

    #[test]
    fn nonneg_examples() {
        assert_eq!(project_nonneg(&v(&[-1.0, 2.0])), v(&[0.0, 2.0]));
        let x = v(&[0.0, 3.5]);
        assert_eq!(project_nonneg(&x), x);
        let once = project_nonneg(&v(&[-0.3, 0.2, -7.0]));
        assert_eq!(project_nonneg(&once), once);
    }

    #[test]
    fn shrink_examples() {
        let b = BoxSet::uniform(1, 0.0, 1.0).unwrap();
        let zero = v(&[0.0]);
        assert_eq!(shrink(&b, 0.0, &zero).unwrap(), b);
        let s = shrink(&b, 0.1, &zero).unwrap();
        assert_eq!(s.lower()[0], 0.0);
        assert!((s.upper()[0] - 0.9).abs() < 1e-15);

        let sym = BoxSet::uniform(1, -1.0, 1.0).unwrap();
        let s = shrink(&sym, 0.5, &zero).unwrap();
        assert_eq!((s.lower()[0], s.upper()[0]), (-0.5, 0.5));
    }

    #[test]
    fn shrink_rejects_bad_inputs() {
        let b = unit_square();
        assert!(shrink(&b, 1.0, &v(&[0.0, 0.0])).is_err());
        assert!(shrink(&b, -0.1, &v(&[0.0, 0.0])).is_err());
        assert!(shrink(&b, 0.2, &v(&[2.0, 0.0])).is_err());
        assert!(shrink(&b, 0.2, &v(&[0.0])).is_err());
    }

    #[test]
    fn default_center_prefers_origin() {
        assert_eq!(default_shrink_center(&unit_square()), v(&[0.0, 0.0]));
        let off = BoxSet::uniform(2, 1.0, 3.0).unwrap();
        assert_eq!(default_shrink_center(&off), v(&[2.0, 2.0]));
        let shrunk = ShrunkBox::about_default_center(off.clone(), 0.5).unwrap();
        assert_eq!(shrunk.shrunk().lower(), &v(&[1.5, 1.5]));
        assert!(off.contains_box(shrunk.shrunk(), 0.0));
    }

    #[test]
    fn projection_beats_random_feasible_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let b = BoxSet::new(v(&[-1.0, 0.0, 2.0]), v(&[1.0, 0.5, 4.0])).unwrap();
        for _ in 0..50 {
            let x = v(&[
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ]);
            let p = project_box(&b, &x);
            let best = (&x - &p).norm();
            for _ in 0..100 {
                let y = v(&[
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..0.5),
                    rng.random_range(2.0..4.0),
                ]);
                assert!(best <= (&x - &y).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn nonexpansive_on_many_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let b = BoxSet::new(v(&[-1.0, 0.0, 0.3]), v(&[1.0, 2.0, 0.3])).unwrap();
        for _ in 0..10_000 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-4.0..4.0));
            let y = DVector::from_fn(3, |_, _| rng.random_range(-4.0..4.0));
            let lhs = (project_box(&b, &x) - project_box(&b, &y)).norm();
            assert!(lhs <= (&x - &y).norm() + 1e-12);
            let lhs = (project_nonneg(&x) - project_nonneg(&y)).norm();
            assert!(lhs <= (&x - &y).norm() + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn shrink_distance_bound(
            lo in proptest::collection::vec(-3.0_f64..0.0, 3),
            width in proptest::collection::vec(0.0_f64..4.0, 3),
            frac in proptest::collection::vec(0.0_f64..1.0, 3),
            rho in 0.0_f64..0.99,
        ) {
            let lower = v(&lo);
            let upper = DVector::from_iterator(3, lo.iter().zip(&width).map(|(l, w)| l + w));
            let b = BoxSet::new(lower.clone(), upper).unwrap();
            let x = DVector::from_iterator(3, (0..3).map(|k| lower[k] + frac[k] * width[k]));
            let s = ShrunkBox::about_default_center(b.clone(), rho).unwrap();
            let gap = (&x - s.project(&x)).norm();
            // componentwise the gap is at most rho * width_k
            let bound = rho * DVector::from_column_slice(&width).norm();
            prop_assert!(gap <= bound + 1e-12);
            prop_assert!(gap <= rho * b.max_width() * (3.0_f64).sqrt() + 1e-12);
        }

        #[test]
        fn shrink_nesting(rho1 in 0.0_f64..0.99, rho2 in 0.0_f64..0.99, c in 0.0_f64..1.0) {
            let (small, big) = if rho1 <= rho2 { (rho1, rho2) } else { (rho2, rho1) };
            let b = BoxSet::uniform(2, 0.0, 1.0).unwrap();
            let center = v(&[c, 1.0 - c]);
            let outer = shrink(&b, small, &center).unwrap();
            let inner = shrink(&b, big, &center).unwrap();
            prop_assert!(outer.contains_box(&inner, 1e-12));
        }
    }
}

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vgne_core::builtin::builtin;
use vgne_core::oracle::{
    activity, check_regularization_bounds, estimate_constants, natural_residual, sampled_constants,
    solve_kkt, solve_regularized_vi, solve_regularized_vi_from, solve_vgne, ConstantsMethod,
};
use vgne_core::{AugmentedPoint, BoxSet, CostOracle, DMatrix, DVector, Error, GameSpec, QuadraticCost};

fn game(name: &str) -> GameSpec {
    builtin(name).unwrap().unwrap()
}

fn linf(a: &DVector<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn case2_reproduces_reported_point() {
    let start = Instant::now();
    let r = solve_vgne(&game("control-case2"), 1e-8).unwrap();
    assert!(linf(&r.primal, &[0.3, 0.0, 0.1950, 0.4483]) < 1e-3, "{}", r.primal);
    assert!(start.elapsed().as_secs() < 10);
    assert_eq!(r.method, "kkt+path");
}

#[test]
fn case1_is_interior_and_reproduced() {
    let g = game("control-case1");
    let r = solve_vgne(&g, 1e-8).unwrap();
    assert!(linf(&r.primal, &[0.5246, 0.0352, 0.1252, 0.4332]) < 1e-3, "{}", r.primal);
    assert!(activity(&g, &r.primal).unwrap().all_inactive(1e-3));
    assert!(r.dual.amax() < 1e-8);
    assert!(r.residual < 1e-8);
}

#[test]
fn coupled_active_game_binds_one_row() {
    let g = game("coupled-active");
    let r = solve_vgne(&g, 1e-8).unwrap();
    let act = activity(&g, &r.primal).unwrap();
    assert_eq!(act.active_coupling(1e-8), vec![0]);
    assert!(act.box_interior(1e-3));
    // stationarity of the Lagrangian: M(a*) + K^T lam* = 0 in the interior
    let w = g.eval_primal_pg(&r.primal, &r.dual).unwrap();
    assert!(w.amax() < 1e-8, "{w}");
    assert!(r.dual[0] > 0.1);
}

#[test]
fn uncoupled_game_clamps_targets() {
    let r = solve_vgne(&game("uncoupled-quadratic"), 1e-8).unwrap();
    assert!(linf(&r.primal, &[0.3, 1.0, 0.0, 0.6]) < 1e-8, "{}", r.primal);
    assert!(r.dual.amax() < 1e-10);
}

#[test]
fn kkt_complementarity_and_feasibility() {
    for name in ["control-case1", "control-case2", "coupled-active", "uncoupled-quadratic"] {
        let g = game(name);
        let r = solve_vgne(&g, 1e-8).unwrap();
        let gv = g.eval_constraint(&r.primal).unwrap();
        assert!(g.joint_set().contains(&r.primal, 1e-12), "{name}");
        for j in 0..gv.len() {
            assert!(gv[j] <= 1e-8, "{name}");
            assert!(r.dual[j] >= 0.0);
            assert!((r.dual[j] * gv[j]).abs() < 1e-6, "{name}");
        }
    }
}

#[test]
fn both_methods_agree() {
    for name in ["control-case1", "control-case2", "coupled-active"] {
        let g = game(name);
        let r = solve_vgne(&g, 1e-8).unwrap();
        let kkt = solve_kkt(&g).unwrap();
        assert!((&r.path_primal - &kkt.primal).amax() < 1e-7, "{name}");
        assert!(r.method_gap.unwrap() < 1e-7);
    }
}

#[test]
fn nonmonotone_game_is_rejected() {
    let g = game("nonmonotone-test");
    assert!(matches!(estimate_constants(&g, 100), Err(Error::NotStronglyMonotone { .. })));
    assert!(matches!(solve_vgne(&g, 1e-8), Err(Error::NotStronglyMonotone { .. })));
}

fn isotropic_game() -> GameSpec {
    // J^i = (a^i)^2 gives M(a) = 2 a
    let mut costs: Vec<Arc<dyn CostOracle>> = Vec::new();
    for i in 0..2 {
        let mut h = DMatrix::zeros(2, 2);
        h[(i, i)] = 2.0;
        costs.push(Arc::new(QuadraticCost::new(h, DVector::zeros(2), 0.0).unwrap()));
    }
    GameSpec::new(
        vec![BoxSet::uniform(1, -1.0, 1.0).unwrap(), BoxSet::uniform(1, -1.0, 1.0).unwrap()],
        costs,
        DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        DVector::from_element(1, 1.0),
    )
    .unwrap()
}

#[test]
fn isotropic_constants() {
    let c = estimate_constants(&isotropic_game(), 0).unwrap();
    assert_eq!(c.method, ConstantsMethod::Jacobian);
    assert!((c.nu - 2.0).abs() < 1e-9);
    assert!((c.lip - 2.0).abs() < 1e-9);
    assert!((c.k_norm - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn sampling_never_undercuts_the_eigenvalue() {
    for name in ["control-case1", "control-case2", "coupled-active", "uncoupled-quadratic"] {
        let g = game(name);
        let exact = estimate_constants(&g, 0).unwrap();
        let s = sampled_constants(&g, 10_000, 5).unwrap();
        assert!(s.nu >= exact.nu - 1e-6, "{name}");
        assert!(s.lip <= exact.lip + 1e-6, "{name}");
        assert!(exact.lip >= exact.nu);
    }
}

#[test]
fn large_regularization_kills_the_dual() {
    let r = solve_regularized_vi(&game("control-case1"), 1e6, 1e-12).unwrap();
    assert!(r.point.dual().norm() < 1e-5);
    // with constraints slack, the dual is exactly zero
    assert_eq!(r.point.dual().amax(), 0.0);
    // on the coupled game the dual is g(a)/eps clipped at zero
    let g = game("coupled-active");
    let r = solve_regularized_vi(&g, 1e6, 1e-14).unwrap();
    let gv = g.eval_constraint(r.point.primal()).unwrap();
    for j in 0..2 {
        let want = (gv[j] / 1e6).max(0.0);
        assert!((r.point.dual()[j] - want).abs() < 1e-12);
    }
    assert!(r.point.dual().norm() < 1e-5);
}

#[test]
fn small_regularization_is_close_to_the_equilibrium() {
    for name in ["control-case1", "control-case2", "coupled-active"] {
        let g = game(name);
        let reference = solve_vgne(&g, 1e-8).unwrap();
        let r = solve_regularized_vi(&g, 1e-6, 1e-10).unwrap();
        assert!((r.point.primal() - &reference.primal).amax() < 1e-2, "{name}");
    }
}

#[test]
fn tolerance_stability() {
    let g = game("coupled-active");
    let a = solve_regularized_vi(&g, 1e-2, 1e-10).unwrap();
    let b = solve_regularized_vi(&g, 1e-2, 1e-12).unwrap();
    assert!((a.point.stacked() - b.point.stacked()).amax() < 1e-9);
    assert!(b.residual < 1e-10);
}

#[test]
fn unique_from_random_starts() {
    let g = game("coupled-active");
    let tol = 1e-10;
    let consts = estimate_constants(&g, 0).unwrap();
    let base = solve_regularized_vi(&g, 1e-2, tol).unwrap().point.stacked();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let start = AugmentedPoint::new(
            DVector::from_fn(4, |_, _| rng.random_range(0.0..1.0)),
            DVector::from_fn(2, |_, _| rng.random_range(0.0..10.0)),
        )
        .unwrap();
        let r = solve_regularized_vi_from(&g, 1e-2, tol, &consts, &start).unwrap();
        assert!((r.point.stacked() - &base).amax() < 10.0 * tol);
        assert!(natural_residual(&g, &r.point, 1e-2).unwrap() < 1e-9);
    }
}

#[test]
fn distance_bounds_hold_on_both_cases() {
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    for name in ["control-case1", "control-case2", "coupled-active"] {
        let g = game(name);
        let reference = solve_vgne(&g, 1e-8).unwrap();
        let report = check_regularization_bounds(&g, &reference, &eps, 1e-8).unwrap();
        assert!(report.all_pass(), "{name}: {report:?}");
        assert!(report.drift_bounded(1e-14), "{name}");
    }
}

#[test]
fn interior_linear_bound_is_checked_where_it_applies() {
    let g = game("coupled-active");
    let reference = solve_vgne(&g, 1e-8).unwrap();
    let report = check_regularization_bounds(&g, &reference, &[1e-1, 1e-2, 1e-3], 1e-8).unwrap();
    assert!(report.interior);
    for b in &report.bounds {
        assert_eq!(b.linear_ok, Some(true));
        assert!(b.primal_gap > 0.0);
        // the gap shrinks linearly in eps
        assert!(b.primal_gap <= b.linear_bound.unwrap() + report.slack);
    }
    let g2 = game("control-case2");
    let r2 = solve_vgne(&g2, 1e-8).unwrap();
    let report2 = check_regularization_bounds(&g2, &r2, &[1e-2], 1e-8).unwrap();
    assert!(!report2.interior);
    assert!(report2.bounds[0].linear_bound.is_none());
}

use vgne_core::builtin::builtin;
use vgne_core::learner::{run, RunConfig, Trace};
use vgne_core::oracle::solve_vgne;
use vgne_core::schedules::{preset, DEFAULT_DELTA};
use vgne_core::{DVector, FeedbackMode, GameSpec};

fn case1() -> GameSpec {
    builtin("control-case1").unwrap().unwrap()
}

fn mean_dist_at(traces: &[Trace], t: u64, a: &DVector<f64>) -> f64 {
    traces
        .iter()
        .map(|tr| {
            let p = tr.points.iter().find(|p| p.t == t).expect("checkpoint");
            (&p.mu - a).norm()
        })
        .sum::<f64>()
        / traces.len() as f64
}

#[test]
fn two_point_runs_approach_the_equilibrium() {
    let game = case1();
    let a_star = solve_vgne(&game, 1e-8).unwrap().primal;
    let sched = preset(FeedbackMode::TwoPoint, false, DEFAULT_DELTA).unwrap();
    let traces: Vec<Trace> = (0..20)
        .map(|seed| run(&RunConfig::new(game.clone(), sched, 1000, seed).unwrap()).unwrap())
        .collect();
    let (d100, d1000) = (mean_dist_at(&traces, 100, &a_star), mean_dist_at(&traces, 1000, &a_star));
    assert!(d1000 < d100, "{d100} -> {d1000}");
    for tr in &traces {
        assert!(tr.stats.feasible());
        assert_eq!(tr.stats.steps, 1000);
        for p in &tr.points {
            assert!(game.joint_set().contains(&p.mu, 0.0));
            assert!(p.lam.iter().all(|v| *v >= 0.0));
        }
    }
}

#[test]
fn one_point_runs_stay_feasible() {
    let game = builtin("control-case2").unwrap().unwrap();
    let sched = preset(FeedbackMode::OnePoint, false, DEFAULT_DELTA).unwrap();
    for seed in 0..5 {
        let tr = run(&RunConfig::new(game.clone(), sched, 2000, seed).unwrap()).unwrap();
        assert!(tr.stats.feasible());
        assert!(tr.stats.max_lam_norm.is_finite());
    }
}

#[test]
fn seeds_give_distinct_but_reproducible_runs() {
    let game = case1();
    let sched = preset(FeedbackMode::TwoPoint, true, DEFAULT_DELTA).unwrap();
    let cfg = |seed| RunConfig::new(game.clone(), sched, 300, seed).unwrap();
    let a = run(&cfg(1)).unwrap();
    let b = run(&cfg(1)).unwrap();
    let c = run(&cfg(2)).unwrap();
    assert_eq!(a.points, b.points);
    assert_ne!(a.points, c.points);
    assert_eq!(a.points.last().unwrap().t, 300);
}

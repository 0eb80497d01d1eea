//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use vgne::cli::{cmd_oracle, OracleArgs};
use vgne::config::{Experiment, ExperimentConfig, PartialConstants};
use vgne::experiment::{run_seeds, summarize_sweep, SweepOutcome};
use vgne::reference::{compute_reference, ReferenceFile};
use vgne::validate::{decomposition_identity, regularized_monotonicity, run_suite, REGULARIZED_EPS};
use vgne::CliResult;
use vgne_core::builtin::builtin;
use vgne_core::oracle::estimate_constants;
use vgne_core::{DVector, FeedbackMode, GameSpec};

const SEEDS: u64 = 20;
const HORIZON: u64 = 100_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> CliResult<Outcome> {
    Ok(Outcome { passed, detail: detail.into() })
}

fn game(name: &str) -> GameSpec {
    builtin(name).expect("builtin").expect("valid builtin")
}

fn oracle(name: &str, out: &Path) -> CliResult<ReferenceFile> {
    let args = OracleArgs {
        config: None,
        game: Some(name.to_string()),
        out: Some(out.to_path_buf()),
        tol: None,
    };
    Ok(cmd_oracle(&args)?.0)
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sweep(mode: FeedbackMode, interior: bool, c: [f64; 4]) -> CliResult<SweepOutcome> {
    let mut cfg = ExperimentConfig::for_game("control-case1", mode, HORIZON);
    cfg.schedule.interior = interior;
    cfg.schedule.constants = PartialConstants {
        gamma: Some(c[0]),
        eps: Some(c[1]),
        sigma: Some(c[2]),
        rho: Some(c[3]),
    };
    cfg.fit_window = Some([1_000, HORIZON]);
    let exp = Experiment::new(cfg, Path::new("."))?.with_seeds((0..SEEDS).collect())?;
    let (reference, _, _) = compute_reference("control-case1", &exp.game, exp.config.tol)?;
    let mut traces = Vec::new();
    for (seed, t) in run_seeds(&exp)? {
        traces.push(t.map_err(|e| vgne::CliError::Run { seed, source: Box::new(e) })?);
    }
    summarize_sweep(&exp, traces, &reference.primal_vector(), reference.activity.all_inactive)
}

fn slope(s: &SweepOutcome) -> f64 {
    s.report.fit.as_ref().map_or(f64::NAN, |f| f.slope)
}

/// Sweeps reused by criterion 10.
#[derive(Default)]
struct Runs {
    sweeps: Vec<(String, SweepOutcome)>,
}

fn c1(dir: &Path) -> CliResult<Outcome> {
    let r = oracle("control-case2", dir)?;
    let err = linf(&r.primal, &[0.3, 0.0, 0.1950, 0.4483]);
    outcome(err <= 2e-3, format!("primal {:?}, linf error {err:.2e}", r.primal))
}

fn c2(dir: &Path) -> CliResult<Outcome> {
    let r = oracle("control-case1", dir)?;
    let err = linf(&r.primal, &[0.5246, 0.0352, 0.1252, 0.4332]);
    outcome(
        err <= 2e-3 && r.activity.min_margin > 1e-3 && r.activity.all_inactive,
        format!("primal {:?}, linf error {err:.2e}, min margin {:.3e}", r.primal, r.activity.min_margin),
    )
}

fn c3(runs: &mut Runs) -> CliResult<Outcome> {
    let c = [1.0, 1.0, 2.0, 1.0];
    let two = sweep(FeedbackMode::TwoPoint, false, c)?;
    let one = sweep(FeedbackMode::OnePoint, false, c)?;
    let (t2, t1) = (two.report.crossing_0_1, one.report.crossing_0_1);
    let passed = t2.is_some_and(|t| t <= 5_000) && t1.is_none_or(|t| t >= 20_000);
    runs.sweeps.push(("c3 two-point".into(), two));
    runs.sweeps.push(("c3 one-point".into(), one));
    outcome(passed, format!("constants {c:?}: two-point below 0.1 at t = {t2:?}, one-point at t = {t1:?}"))
}

fn c4(runs: &mut Runs) -> CliResult<Outcome> {
    let s = sweep(FeedbackMode::TwoPoint, true, [1.0; 4])?;
    let k = slope(&s);
    runs.sweeps.push(("c4 interior two-point".into(), s));
    outcome(k <= -0.35, format!("slope {k:.4} over [1e3, 1e5] (threshold -0.35)"))
}

fn c5(runs: &mut Runs) -> CliResult<Outcome> {
    let c = [0.5, 1.0, 0.5, 1.0];
    let one = sweep(FeedbackMode::OnePoint, false, c)?;
    let two = sweep(FeedbackMode::TwoPoint, false, c)?;
    let (k1, k2) = (slope(&one), slope(&two));
    runs.sweeps.push(("c5 one-point".into(), one));
    runs.sweeps.push(("c5 two-point".into(), two));
    outcome(
        k1 - k2 >= 0.1,
        format!("constants {c:?}: one-point {k1:.4}, two-point {k2:.4}, gap {:.4}", k1 - k2),
    )
}

fn c6() -> CliResult<Outcome> {
    let g = game("control-case1");
    let nu = estimate_constants(&g, 10_000)?.nu;
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for (k, eps) in REGULARIZED_EPS.iter().enumerate() {
        let (min_ratio, violations) = regularized_monotonicity(&g, nu, *eps, k as u64)?;
        worst = worst.min(min_ratio);
        bad += violations;
    }
    outcome(bad == 0, format!("{bad} violations, smallest margin {worst:.3e}"))
}

fn c7(dir: &Path) -> CliResult<Outcome> {
    let mut passed = true;
    let mut detail = Vec::new();
    for name in ["control-case1", "control-case2"] {
        let r = oracle(name, dir)?;
        let sq = r.regularization.bounds.iter().all(|b| b.squared_ok);
        passed &= sq;
        detail.push(format!("{name}: squared bound {}", if sq { "ok" } else { "violated" }));
        if name == "control-case1" {
            let lin = r.regularization.bounds.iter().all(|b| b.linear_ok == Some(true));
            passed &= lin;
            detail.push(format!("linear bound {}", if lin { "ok" } else { "violated or absent" }));
        }
    }
    outcome(passed, detail.join(", "))
}

fn c8() -> CliResult<Outcome> {
    let r = run_suite("estimators", "control-case1", &game("control-case1"), 0)?;
    let wanted = [
        "two_point_unbiased_zero_dual",
        "two_point_unbiased_positive_dual",
        "one_point_second_moment_slope",
        "two_point_second_moment_ratio",
    ];
    let mut passed = true;
    let mut detail = Vec::new();
    for name in wanted {
        let p = r.property(name).expect("suite reports every property");
        let ok = p.passed == Some(true);
        passed &= ok;
        detail.push(format!("{name} {} ({:.3})", if ok { "ok" } else { "FAILED" }, p.measured));
    }
    outcome(passed, detail.join(", "))
}

fn c9() -> CliResult<Outcome> {
    let g = game("control-case1");
    let mut passed = true;
    let mut detail = Vec::new();
    for mode in [FeedbackMode::OnePoint, FeedbackMode::TwoPoint] {
        let c = decomposition_identity(&g, mode, 1_000, 0)?;
        passed &= c.records == 1_000 && c.max_error <= 1e-10;
        detail.push(format!("{}: {} records, max error {:.2e}", mode.as_str(), c.records, c.max_error));
    }
    outcome(passed, detail.join(", "))
}

fn c10(runs: &Runs) -> CliResult<Outcome> {
    let g = game("control-case1");
    let (reference, _, _) = compute_reference("control-case1", &g, 1e-8)?;
    let cap = 100.0 * (1.0 + DVector::from_column_slice(&reference.dual).norm());
    if runs.sweeps.is_empty() {
        return outcome(false, "no runs from criteria 3-5");
    }
    let mut passed = true;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (label, s) in &runs.sweeps {
        for t in &s.traces {
            count += 1;
            worst = worst.max(t.stats.max_lam_norm);
            if !t.stats.feasible() || !(t.stats.max_lam_norm < cap) {
                passed = false;
                eprintln!("  infeasible run in {label}, seed {}", t.seed);
            }
        }
    }
    outcome(passed, format!("{count} runs, max |lambda| {worst:.3e} (cap {cap:.1})"))
}

type Check<'a> = Box<dyn FnOnce(&mut Runs) -> CliResult<Outcome> + 'a>;

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut runs = Runs::default();
    let checks: Vec<(&str, Duration, Check<'_>)> = vec![
        ("1 equilibrium, case 2", Duration::from_secs(10), Box::new(|_| c1(dir.path()))),
        ("2 interior equilibrium, case 1", Duration::from_secs(10), Box::new(|_| c2(dir.path()))),
        ("3 two-point vs one-point crossing", Duration::from_secs(300), Box::new(c3)),
        ("4 interior two-point rate", Duration::from_secs(600), Box::new(c4)),
        ("5 rate ordering", Duration::from_secs(900), Box::new(c5)),
        ("6 regularized monotonicity", Duration::from_secs(5), Box::new(|_| c6())),
        ("7 regularization bounds", Duration::from_secs(30), Box::new(|_| c7(dir.path()))),
        ("8 estimator moments", Duration::from_secs(60), Box::new(|_| c8())),
        ("9 decomposition identity", Duration::from_secs(10), Box::new(|_| c9())),
        ("10 feasibility", Duration::from_secs(60), Box::new(|r: &mut Runs| c10(r))),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let result = check(&mut runs);
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.1}s of {}s]",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

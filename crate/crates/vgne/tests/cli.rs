use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vgne::csvio::{read_strict, AGGREGATE_HEADER};
use vgne::experiment::TraceMeta;
use vgne::reference::ReferenceFile;
use vgne::validate::SuiteReport;

fn vgne(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vgne"))
        .args(args)
        .current_dir(cwd)
        .env_remove("VGNE_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

#[test]
fn run_writes_trace_meta_and_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"game": "control-case1", "horizon": 2000, "seeds": [4]}"#);
    let out = tmp.path().join("out");
    let o = vgne(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        files(&out),
        vec!["reference.json", "trace_two_point_seed4.csv", "trace_two_point_seed4.meta.json"]
    );

    let t = read_strict(&out.join("trace_two_point_seed4.csv"), &[]).unwrap();
    assert_eq!(
        t.header,
        vec!["t", "mu_1", "mu_2", "mu_3", "mu_4", "lam_1", "lam_2", "dist_vgne", "gnorm_pos", "gamma", "eps", "sigma", "rho"]
    );
    assert!(t.rows.len() >= 30, "{} rows", t.rows.len());
    let ts: Vec<f64> = t.column("t").unwrap().into_iter().map(Option::unwrap).collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*ts.last().unwrap(), 2000.0);
    let d: Vec<f64> = t.column("dist_vgne").unwrap().into_iter().map(Option::unwrap).collect();
    assert!(d.last().unwrap() < &d[0]);
    for col in ["lam_1", "lam_2"] {
        assert!(t.column(col).unwrap().iter().all(|v| v.unwrap() >= 0.0));
    }
    for col in ["mu_1", "mu_2", "mu_3", "mu_4"] {
        assert!(t.column(col).unwrap().iter().all(|v| (0.0..=1.0).contains(&v.unwrap())));
    }

    let meta: TraceMeta = serde_json::from_str(&fs::read_to_string(out.join("trace_two_point_seed4.meta.json")).unwrap()).unwrap();
    assert_eq!(meta.seed, 4);
    assert_eq!(meta.steps, 2000);
    assert!(!meta.partial);
    assert_eq!(meta.columns, t.header);
    assert_eq!(meta.config_hash.len(), 64);

    let r: ReferenceFile = serde_json::from_str(&fs::read_to_string(out.join("reference.json")).unwrap()).unwrap();
    assert!(r.activity.all_inactive);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"game": "control-case1", "mode": "one_point", "horizon": 1500, "seeds": [0, 1]}"#,
    );
    let mut texts = Vec::new();
    for out in ["a", "b"] {
        let o = vgne(&["run", "--config", cfg.to_str().unwrap(), "--out", out], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
        texts.push(fs::read(tmp.path().join(out).join("trace_one_point_seed1.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let other = fs::read(tmp.path().join("a").join("trace_one_point_seed0.csv")).unwrap();
    assert_ne!(other, texts[0]);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"game": "control-case2", "horizon": 100, "seeds": [0, 1, 2]}"#);
    let o = vgne(&["run", "--config", cfg.to_str().unwrap(), "--out", "o", "--seed", "9"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        files(&tmp.path().join("o")),
        vec!["reference.json", "trace_two_point_seed9.csv", "trace_two_point_seed9.meta.json"]
    );
}

#[test]
fn trace_without_reference_leaves_distance_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"game": "uncoupled-quadratic", "horizon": 50, "attach_reference": false}"#,
    );
    let o = vgne(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let path = tmp.path().join("o").join("trace_two_point_seed0.csv");
    assert!(read_strict(&path, &[]).is_err());
    let t = read_strict(&path, &["dist_vgne"]).unwrap();
    assert!(t.column("dist_vgne").unwrap().iter().all(Option::is_none));
    assert!(!tmp.path().join("o").join("reference.json").exists());
}

#[test]
fn inline_and_file_games_are_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vgne(&["game", "control-case2"], tmp.path());
    assert!(o.status.success());
    fs::create_dir(tmp.path().join("games")).unwrap();
    fs::write(tmp.path().join("games/g.json"), &o.stdout).unwrap();
    // relative to the config file, not the working directory
    let cfg = write_config(tmp.path(), "c.json", r#"{"game": "games/g.json", "horizon": 20}"#);
    let elsewhere = tempfile::tempdir().unwrap();
    let r = vgne(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], elsewhere.path());
    assert!(r.status.success(), "{}", stderr(&r));

    let game: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let inline = serde_json::json!({"game": game, "horizon": 20});
    let cfg = write_config(tmp.path(), "i.json", &inline.to_string());
    let r = vgne(&["run", "--config", cfg.to_str().unwrap(), "--out", "i"], tmp.path());
    assert!(r.status.success(), "{}", stderr(&r));
    let a = fs::read(elsewhere.path().join("o/trace_two_point_seed0.csv")).unwrap();
    let b = fs::read(tmp.path().join("i/trace_two_point_seed0.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_inputs_fail_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = vgne(&["run", "--config", "missing.json", "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"));
    assert!(!out.exists());

    for body in [
        r#"{"game": "control-case1"}"#,
        r#"{"game": "control-case1", "horizon": 100, "extra": true}"#,
        r#"{"game": "no-such-game", "horizon": 100}"#,
        r#"{"game": "control-case1", "horizon": 100, "schedule": {"exponents": {"gamma": 0.6}}}"#,
        r#"{"game": "control-case1", "horizon": 100, "seeds": []}"#,
        "not json",
    ] {
        let cfg = write_config(tmp.path(), "bad.json", body);
        let o = vgne(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], tmp.path());
        assert_eq!(o.status.code(), Some(1), "{body}");
        assert!(!out.exists(), "{body}");
    }

    let o = vgne(&["bogus"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = vgne(&["--help"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let o = vgne(&["game", "nope"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_reports_equilibria() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vgne(&["oracle", "--game", "control-case2", "--out", "o"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = ReferenceFile::load(&tmp.path().join("o/reference.json")).unwrap();
    let want = [0.3, 0.0, 0.1950, 0.4483];
    for (a, b) in r.primal.iter().zip(want) {
        assert!((a - b).abs() < 1e-3, "{:?}", r.primal);
    }
    assert!(!r.activity.all_inactive);

    let o = vgne(&["oracle", "--game", "control-case1", "--out", "p"], tmp.path());
    assert!(o.status.success());
    let r = ReferenceFile::load(&tmp.path().join("p/reference.json")).unwrap();
    assert!(r.activity.all_inactive);
    assert!(r.activity.min_margin > 1e-3);
    assert!(r.regularization.all_pass);
    assert!(r.regularization.bounds.iter().all(|b| b.linear_ok == Some(true)));

    let o = vgne(&["oracle", "--game", "nonmonotone-test", "--out", "n"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).to_lowercase().contains("monoton"), "{}", stderr(&o));
    assert!(!tmp.path().join("n/reference.json").exists());

    let o = vgne(&["oracle", "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_needs_twenty_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"game": "control-case1", "horizon": 100}"#);
    let o = vgne(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("20"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn sweep_writes_aggregate_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"game": "control-case1", "horizon": 3000}"#);
    let o = vgne(&["sweep", "--config", cfg.to_str().unwrap(), "--out", "o", "--seeds", "0..20"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("o");
    let names = files(&dir);
    assert_eq!(names.iter().filter(|n| n.ends_with(".csv") && n.starts_with("trace_")).count(), 20);
    let t = read_strict(&dir.join("sweep_two_point.csv"), &[]).unwrap();
    assert_eq!(t.header, AGGREGATE_HEADER);
    assert!(t.column("runs").unwrap().iter().all(|r| *r == Some(20.0)));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("sweep_two_point.json")).unwrap()).unwrap();
    assert_eq!(rep["seeds"].as_array().unwrap().len(), 20);
    assert!(rep["fit"]["slope"].as_f64().unwrap() < 0.0);
    assert_eq!(rep["all_feasible"], true);

    // reusing the equilibrium file gives the same statistics
    let o = vgne(
        &["sweep", "--config", cfg.to_str().unwrap(), "--out", "r", "--seeds", "0..20", "--reference", "o/reference.json"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(dir.join("sweep_two_point.csv")).unwrap(),
        fs::read(tmp.path().join("r/sweep_two_point.csv")).unwrap()
    );
}

#[test]
fn validate_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vgne(&["validate", "foo", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(1));

    let o = vgne(&["validate", "monotonicity", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: SuiteReport = serde_json::from_str(&fs::read_to_string(tmp.path().join("o/validate_monotonicity.json")).unwrap()).unwrap();
    assert!(rep.passed);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS regularized_monotonicity_eps_1e-3"));

    // two presets have a non-summable series
    let o = vgne(&["validate", "schedules", "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let rep: SuiteReport = serde_json::from_str(&fs::read_to_string(tmp.path().join("o/validate_schedules.json")).unwrap()).unwrap();
    assert_eq!(rep.failures().len(), 2);

    let o = vgne(&["validate", "monotonicity", "--game", "nonmonotone-test", "--out", "o"], tmp.path());
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn out_dir_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"game": "control-case2", "horizon": 20}"#);
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_vgne"));
        c.args(["run", "--config", cfg.to_str().unwrap()]).args(extra).current_dir(tmp.path());
        match env {
            Some(v) => c.env("VGNE_OUT_DIR", v),
            None => c.env_remove("VGNE_OUT_DIR"),
        };
        let o = c.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    };
    run(&[], Some("from-env"));
    assert!(tmp.path().join("from-env/trace_two_point_seed0.csv").exists());
    run(&["--out", "from-flag"], Some("from-env2"));
    assert!(tmp.path().join("from-flag/trace_two_point_seed0.csv").exists());
    assert!(!tmp.path().join("from-env2").exists());
    run(&[], None);
    assert!(tmp.path().join("vgne-out/trace_two_point_seed0.csv").exists());

    let cfg2 = write_config(tmp.path(), "d.json", r#"{"game": "control-case2", "horizon": 20, "out_dir": "from-config"}"#);
    let o = Command::new(env!("CARGO_BIN_EXE_vgne"))
        .args(["run", "--config", cfg2.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("VGNE_OUT_DIR", "ignored")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("from-config/trace_two_point_seed0.csv").exists());
    assert!(!tmp.path().join("ignored").exists());
}

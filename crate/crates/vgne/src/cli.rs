//! The `vgne` command line.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use vgne_core::builtin::builtin;

use crate::config::{
    parse_seeds, resolve_out_dir, write_json, Experiment, ExperimentConfig, GameConfig, GameRef,
};
use crate::error::{input, CliResult};
use crate::experiment::{
    ensure_dir, game_label, run_and_write, summarize_sweep, write_sweep_files, MIN_SWEEP_SEEDS,
};
use crate::reference::{compute_reference, ReferenceFile, REFERENCE_FILE};
use crate::validate::{run_suite, SuiteReport, SUITES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PROPERTY_FAILED: i32 = 2;

/// Payoff-based equilibrium learning experiments.
#[derive(Debug, Parser)]
#[command(name = "vgne", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the learner once per seed and write one trace CSV per run.
    Run(RunArgs),
    /// Compute the equilibrium, game constants and regularization report.
    Oracle(OracleArgs),
    /// Run at least 20 seeds and write ensemble statistics and a rate fit.
    Sweep(SweepArgs),
    /// Run a property suite.
    Validate(ValidateArgs),
    /// Print a built-in game as a JSON game file.
    Game {
        name: String,
    },
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    /// Run a single seed instead of the configured ones.
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seeds as `0,3,7` or `0..20`.
    #[arg(long)]
    pub seeds: Option<String>,
}

impl SeedArgs {
    fn resolve(&self) -> CliResult<Option<Vec<u64>>> {
        match (&self.seed, &self.seeds) {
            (Some(s), _) => Ok(Some(vec![*s])),
            (None, Some(list)) => parse_seeds(list).map(Some),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub seeds: SeedArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Reuse an equilibrium file instead of computing it.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Take the game from an experiment config.
    #[arg(long, conflicts_with = "game")]
    pub config: Option<PathBuf>,
    /// A built-in game name or a game file.
    #[arg(long)]
    pub game: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// One of monotonicity, estimators, regularization, decomposition, schedules.
    pub suite: String,
    #[arg(long, conflicts_with = "game")]
    pub config: Option<PathBuf>,
    /// Game to test; defaults to control-case1.
    #[arg(long)]
    pub game: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Run(a) => cmd_run(&a),
        Command::Oracle(a) => cmd_oracle(&a).map(|(_, code)| code),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Validate(a) => cmd_validate(&a).map(|(_, code)| code),
        Command::Game { name } => {
            let game = builtin(&name).ok_or_else(|| input(format!("unknown built-in game '{name}'")))??;
            let text = serde_json::to_string_pretty(&GameConfig::from_game(&game)?).expect("serializable");
            // a closed pipe (`vgne game x | head`) is not an error
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(EXIT_OK)
        }
    }
}

fn load_experiment(path: &Path, seeds: &SeedArgs) -> CliResult<Experiment> {
    let (cfg, base) = ExperimentConfig::load(path)?;
    let exp = Experiment::new(cfg, &base)?;
    match seeds.resolve()? {
        Some(s) => exp.with_seeds(s),
        None => Ok(exp),
    }
}

fn print_reference(r: &ReferenceFile) {
    println!("game        {}", r.game);
    println!("primal      {:?}", r.primal);
    println!("dual        {:?}", r.dual);
    println!("method      {} (residual {:.3e})", r.method, r.residual);
    println!(
        "constants   nu = {:.6}, L = {:.6}, |K| = {:.6}",
        r.constants.nu, r.constants.lip, r.constants.k_norm
    );
    println!(
        "constraints min margin {:.3e}, all inactive: {}, active coupling rows: {:?}",
        r.activity.min_margin, r.activity.all_inactive, r.activity.active_coupling_rows
    );
    println!(
        "bounds      {} (drift bounded: {})",
        if r.regularization.all_pass { "pass" } else { "FAIL" },
        r.regularization.drift_bounded
    );
}

pub fn cmd_run(a: &RunArgs) -> CliResult<i32> {
    let exp = load_experiment(&a.config, &a.seeds)?;
    let dir = exp.out_dir(a.out.as_deref());
    let reference = if exp.config.attach_reference {
        let (file, sol, _) = compute_reference(&game_label(&exp), &exp.game, exp.config.tol)?;
        ensure_dir(&dir)?;
        file.save(&dir.join(REFERENCE_FILE))?;
        Some(sol.primal)
    } else {
        None
    };
    let traces = run_and_write(&exp, &dir, reference.as_ref())?;
    for tr in &traces {
        let last = tr.points.last().expect("horizon >= 10");
        match &reference {
            Some(r) => println!(
                "seed {}: t = {}, |mu - a*| = {:.4e} (from {:.4e})",
                tr.seed,
                last.t,
                (&last.mu - r).norm(),
                (&tr.initial.mu - r).norm()
            ),
            None => println!("seed {}: t = {}", tr.seed, last.t),
        }
    }
    println!("wrote {} trace(s) to {}", traces.len(), dir.display());
    Ok(EXIT_OK)
}

pub fn cmd_oracle(a: &OracleArgs) -> CliResult<(ReferenceFile, i32)> {
    let (label, game, tol, configured_out) = match (&a.config, &a.game) {
        (Some(path), _) => {
            let (cfg, base) = ExperimentConfig::load(path)?;
            let exp = Experiment::new(cfg, &base)?;
            (game_label(&exp), exp.game, exp.config.tol, exp.config.out_dir)
        }
        (None, Some(name)) => {
            let (game, _) = GameRef::Named(name.clone()).resolve(Path::new("."))?;
            (name.clone(), game, 1e-8, None)
        }
        (None, None) => return Err(input("oracle needs --game or --config")),
    };
    let tol = a.tol.unwrap_or(tol);
    let (file, _, _) = compute_reference(&label, &game, tol)?;
    let dir = resolve_out_dir(a.out.as_deref(), configured_out.as_deref());
    ensure_dir(&dir)?;
    file.save(&dir.join(REFERENCE_FILE))?;
    print_reference(&file);
    let code = if file.regularization.all_pass {
        EXIT_OK
    } else {
        EXIT_PROPERTY_FAILED
    };
    Ok((file, code))
}

pub fn cmd_sweep(a: &SweepArgs) -> CliResult<i32> {
    let exp = load_experiment(&a.config, &a.seeds)?;
    if exp.seeds.len() < MIN_SWEEP_SEEDS {
        return Err(input(format!(
            "a sweep needs at least {MIN_SWEEP_SEEDS} seeds, got {}",
            exp.seeds.len()
        )));
    }
    let dir = exp.out_dir(a.out.as_deref());
    let reference = match &a.reference {
        Some(p) => {
            let r = ReferenceFile::load(p)?;
            r.check_game(&exp.game)?;
            r
        }
        None => compute_reference(&game_label(&exp), &exp.game, exp.config.tol)?.0,
    };
    ensure_dir(&dir)?;
    reference.save(&dir.join(REFERENCE_FILE))?;
    let a_star = reference.primal_vector();
    let traces = run_and_write(&exp, &dir, Some(&a_star))?;
    let interior = reference.activity.all_inactive;
    let out = summarize_sweep(&exp, traces, &a_star, interior)?;
    let (csv, json) = write_sweep_files(&exp, &dir, &out)?;
    let r = &out.report;
    match &r.fit {
        Some(f) => println!(
            "slope of mean squared distance over t in [{}, {}]: {:.4} +- {:.4} (predicted -{:.4})",
            f.window[0], f.window[1], f.slope, 2.0 * f.std_err, r.predicted_exponent
        ),
        None => println!("no rate fit: {}", r.fit_error.as_deref().unwrap_or("")),
    }
    println!(
        "mean distance below 0.1 at t = {:?}; below a tenth of the initial {:.4} at t = {:?}",
        r.crossing_0_1, r.initial_mean_dist, r.crossing_tenth_initial
    );
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(EXIT_OK)
}

pub fn cmd_validate(a: &ValidateArgs) -> CliResult<(SuiteReport, i32)> {
    if !SUITES.contains(&a.suite.as_str()) {
        return Err(input(format!(
            "unknown suite '{}', expected one of {}",
            a.suite,
            SUITES.join(", ")
        )));
    }
    let (label, game, configured_out) = match (&a.config, &a.game) {
        (Some(path), _) => {
            let (cfg, base) = ExperimentConfig::load(path)?;
            let exp = Experiment::new(cfg, &base)?;
            (game_label(&exp), exp.game, exp.config.out_dir)
        }
        (None, name) => {
            let name = name.clone().unwrap_or_else(|| "control-case1".to_string());
            let (game, _) = GameRef::Named(name.clone()).resolve(Path::new("."))?;
            (name, game, None)
        }
    };
    let report = run_suite(&a.suite, &label, &game, a.seed)?;
    for p in &report.properties {
        let status = match p.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        println!("{status} {:<48} {:>14.6e}  {}", p.name, p.measured, p.threshold);
    }
    let dir = resolve_out_dir(a.out.as_deref(), configured_out.as_deref());
    ensure_dir(&dir)?;
    let path = dir.join(format!("validate_{}.json", a.suite));
    write_json(&path, &report)?;
    println!("suite {}: {}", a.suite, if report.passed { "pass" } else { "FAIL" });
    let code = if report.passed {
        EXIT_OK
    } else {
        EXIT_PROPERTY_FAILED
    };
    Ok((report, code))
}


//! JSON game and experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vgne_core::builtin::{builtin, BUILTIN_NAMES};
use vgne_core::learner::LearnerState;
use vgne_core::schedules::{preset, Constants, Exponents, ScheduleConfig, DEFAULT_DELTA};
use vgne_core::{BoxSet, CostOracle, DMatrix, DVector, FeedbackMode, GameSpec, QuadraticCost};

use crate::error::{input, io_err, CliError, CliResult};

pub const OUT_DIR_ENV: &str = "VGNE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "vgne-out";

/// `J(a) = 1/2 a^T hessian a + linear^T a + constant` over the joint action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub hessian: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: CostConfig,
}

/// Rows of `K` and the entries of `l` in `K a <= l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub k: Vec<Vec<f64>>,
    pub l: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub players: Vec<PlayerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
}

fn matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> CliResult<DMatrix<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(input(format!(
            "{what}: row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl GameConfig {
    pub fn dim(&self) -> usize {
        self.players.iter().map(|p| p.lower.len()).sum()
    }

    pub fn build(&self) -> CliResult<GameSpec> {
        let d = self.dim();
        let mut sets = Vec::new();
        let mut costs: Vec<Arc<dyn CostOracle>> = Vec::new();
        for (i, p) in self.players.iter().enumerate() {
            sets.push(BoxSet::new(
                DVector::from_column_slice(&p.lower),
                DVector::from_column_slice(&p.upper),
            )?);
            if p.cost.hessian.len() != d {
                return Err(input(format!(
                    "player {i}: cost matrix has {} rows, expected {d}",
                    p.cost.hessian.len()
                )));
            }
            let h = matrix(&p.cost.hessian, d, &format!("player {i} cost matrix"))?;
            costs.push(Arc::new(QuadraticCost::new(
                h,
                DVector::from_column_slice(&p.cost.linear),
                p.cost.constant,
            )?));
        }
        let (k, l) = match &self.coupling {
            Some(c) => (
                matrix(&c.k, d, "coupling matrix")?,
                DVector::from_column_slice(&c.l),
            ),
            None => (DMatrix::zeros(0, d), DVector::zeros(0)),
        };
        Ok(GameSpec::new(sets, costs, k, l)?)
    }

    /// The configuration of a game whose costs are all quadratic.
    pub fn from_game(game: &GameSpec) -> CliResult<Self> {
        let mut players = Vec::new();
        for i in 0..game.num_players() {
            let q = game
                .cost_oracle(i)
                .as_quadratic()
                .ok_or_else(|| input(format!("player {i} has a non-quadratic cost")))?;
            let h = q.hessian();
            players.push(PlayerConfig {
                lower: game.local_set(i).lower().iter().copied().collect(),
                upper: game.local_set(i).upper().iter().copied().collect(),
                cost: CostConfig {
                    hessian: h.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    linear: q.linear().iter().copied().collect(),
                    constant: q.constant(),
                },
            });
        }
        let k = game.coupling_matrix();
        let coupling = (k.nrows() > 0).then(|| CouplingConfig {
            k: k.row_iter().map(|r| r.iter().copied().collect()).collect(),
            l: game.coupling_offset().iter().copied().collect(),
        });
        Ok(Self { players, coupling })
    }
}

/// A built-in game name, a path to a game file, or an inline game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameRef {
    Named(String),
    Inline(GameConfig),
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

impl GameRef {
    /// Resolves file references relative to `base`; returns the game and a
    /// self-contained description of it for hashing.
    pub fn resolve(&self, base: &Path) -> CliResult<(GameSpec, GameRef)> {
        match self {
            GameRef::Named(name) => {
                if let Some(g) = builtin(name) {
                    return Ok((g?, self.clone()));
                }
                let path = base.join(name);
                if !path.is_file() {
                    return Err(input(format!(
                        "unknown game '{name}': not a built-in ({}) and no such file",
                        BUILTIN_NAMES.join(", ")
                    )));
                }
                let cfg: GameConfig = read_json(&path)?;
                Ok((cfg.build()?, GameRef::Inline(cfg)))
            }
            GameRef::Inline(cfg) => Ok((cfg.build()?, self.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConstants {
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialExponents {
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

/// Preset selection plus overrides of individual constants and exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Use the preset tuned for equilibria inside the action set.
    #[serde(default)]
    pub interior: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub constants: PartialConstants,
    #[serde(default)]
    pub exponents: PartialExponents,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            interior: false,
            delta: DEFAULT_DELTA,
            constants: PartialConstants::default(),
            exponents: PartialExponents::default(),
        }
    }
}

impl ScheduleSection {
    pub fn build(&self, mode: FeedbackMode) -> CliResult<ScheduleConfig> {
        let base = preset(mode, self.interior, self.delta)?;
        let c = base.constants();
        let x = base.exponents();
        let pc = self.constants;
        let px = self.exponents;
        let constants = Constants {
            gamma: pc.gamma.unwrap_or(c.gamma),
            eps: pc.eps.unwrap_or(c.eps),
            sigma: pc.sigma.unwrap_or(c.sigma),
            rho: pc.rho.unwrap_or(c.rho),
        };
        let exponents = Exponents {
            g: px.gamma.unwrap_or(x.g),
            e: px.eps.unwrap_or(x.e),
            s: px.sigma.unwrap_or(x.s),
            r: px.rho.unwrap_or(x.r),
        };
        Ok(base.with_constants(constants)?.with_exponents(exponents)?)
    }
}

/// An explicit list of seeds or a contiguous range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::List(vec![0])
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

/// Parses `"3"`, `"0,4,9"` or `"0..20"`.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || input(format!("cannot parse seeds '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub mu: Vec<f64>,
    pub lam: Vec<f64>,
}

mod mode_name {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};
    use vgne_core::FeedbackMode;

    pub fn serialize<S: Serializer>(m: &FeedbackMode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(m.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FeedbackMode, D::Error> {
        let s = String::deserialize(d)?;
        FeedbackMode::parse(&s)
            .ok_or_else(|| D::Error::custom(format!("unknown mode '{s}', use one_point or two_point")))
    }
}

fn default_mode() -> FeedbackMode {
    FeedbackMode::TwoPoint
}

fn yes() -> bool {
    true
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameRef,
    #[serde(with = "mode_name", default = "default_mode")]
    pub mode: FeedbackMode,
    #[serde(default)]
    pub schedule: ScheduleSection,
    pub horizon: u64,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Compute the equilibrium once and add distances to the traces.
    #[serde(default = "yes")]
    pub attach_reference: bool,
    /// Extra trace rows every `stride` steps; 0 keeps only the log-spaced checkpoints.
    #[serde(default)]
    pub stride: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    /// Checkpoint window `[from, to]` of the rate fit; defaults to `[horizon/100, horizon]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[u64; 2]>,
    /// Tolerance of the equilibrium computation.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl ExperimentConfig {
    /// A config for `game` with default settings.
    pub fn for_game(game: &str, mode: FeedbackMode, horizon: u64) -> Self {
        Self {
            game: GameRef::Named(game.to_string()),
            mode,
            schedule: ScheduleSection::default(),
            horizon,
            seeds: SeedSpec::default(),
            out_dir: None,
            attach_reference: true,
            stride: 0,
            initial: None,
            fit_window: None,
            tol: default_tol(),
        }
    }

    pub fn load(path: &Path) -> CliResult<(Self, PathBuf)> {
        let cfg: Self = read_json(path)?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, base))
    }
}

/// A validated, fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub game: GameSpec,
    pub schedule: ScheduleConfig,
    pub seeds: Vec<u64>,
    pub initial: LearnerState,
    /// SHA-256 of the resolved configuration.
    pub hash: String,
}

impl Experiment {
    pub fn new(config: ExperimentConfig, base: &Path) -> CliResult<Self> {
        if config.horizon < 10 {
            return Err(input("horizon must be at least 10"));
        }
        let seeds = config.seeds.seeds();
        if seeds.is_empty() {
            return Err(input("the seed list is empty"));
        }
        if !(config.tol > 0.0) {
            return Err(input("tol must be positive"));
        }
        let (game, resolved) = config.game.resolve(base)?;
        let schedule = config.schedule.build(config.mode)?;
        let initial = match &config.initial {
            Some(init) => LearnerState::new(
                &game,
                DVector::from_column_slice(&init.mu),
                DVector::from_column_slice(&init.lam),
            )?,
            None => LearnerState::initial(&game),
        };
        let mut hashed = config.clone();
        hashed.game = resolved;
        hashed.out_dir = None;
        hashed.seeds = SeedSpec::List(Vec::new());
        let canonical = serde_json::to_vec(&hashed).expect("config serializes");
        let hash = Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(Self {
            config,
            game,
            schedule,
            seeds,
            initial,
            hash,
        })
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> CliResult<Self> {
        if seeds.is_empty() {
            return Err(input("the seed list is empty"));
        }
        self.seeds = seeds;
        Ok(self)
    }

    pub fn fit_window(&self) -> (u64, u64) {
        match self.config.fit_window {
            Some([a, b]) => (a, b),
            None => ((self.config.horizon / 100).max(1), self.config.horizon),
        }
    }

    /// `--out`, then the config's `out_dir`, then the environment, then the default.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        resolve_out_dir(flag, self.config.out_dir.as_deref())
    }
}

pub fn resolve_out_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    if let Some(p) = flag.or(configured) {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::envsim::WorldConfig;
use crate::error::ConfigError;
use crate::hmappo::TrainConfig;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "AUV_HMAPPO_OUT";
const FALLBACK_OUT: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 300 episodes with faster learning rates.
    #[default]
    Desk,
    /// The full-length schedule: 2000 episodes at the small learning rates.
    Paper,
}

impl Profile {
    pub fn train_defaults(self) -> TrainConfig {
        match self {
            Profile::Desk => TrainConfig::desk(),
            Profile::Paper => TrainConfig::default(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(ConfigError::BadValue(format!(
                "profile must be `desk` or `paper`, got `{other}`"
            ))),
        }
    }
}

/// The `[experiment]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub name: String,
    /// One run per seed. Empty means `[train].seed` alone.
    pub seeds: Vec<u64>,
    /// Covertness budgets visited by `sweep-epsilon`.
    pub epsilons: Vec<f64>,
    pub eval_episodes: usize,
    /// Seed of the evaluation episodes, shared by every compared policy.
    pub eval_seed: u64,
    /// Output root; empty defers to `--out`, then the environment.
    pub out_dir: String,
    /// Print a progress line every this many episodes (0 disables).
    pub progress_every: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            name: "hmappo".into(),
            seeds: Vec::new(),
            epsilons: vec![0.01, 0.05, 0.1, 0.2],
            eval_episodes: 200,
            eval_seed: 1,
            out_dir: String::new(),
            progress_every: 0,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliOverrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    /// Training episodes.
    pub episodes: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Fully resolved experiment: defaults, then the file, then the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub profile: Profile,
    pub world: WorldConfig,
    pub train: TrainConfig,
    pub name: String,
    pub seeds: Vec<u64>,
    pub epsilons: Vec<f64>,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    pub out_dir: PathBuf,
    pub progress_every: usize,
}

/// What `config.toml` in a run directory holds.
#[derive(Debug, Serialize)]
struct Snapshot<'a> {
    profile: Profile,
    world: &'a WorldConfig,
    train: &'a TrainConfig,
    experiment: ExperimentSettings,
}

impl ExperimentSpec {
    pub fn defaults(profile: Profile) -> Self {
        resolve(profile, Table::new(), &CliOverrides::default()).expect("built-in defaults are valid")
    }

    /// Run settings for one seed.
    pub fn train_for_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    /// A loadable TOML document that reproduces this spec for one seed.
    pub fn snapshot_toml(&self, seed: u64) -> Result<String, ConfigError> {
        let train = self.train_for_seed(seed);
        let snap = Snapshot {
            profile: self.profile,
            world: &self.world,
            train: &train,
            experiment: ExperimentSettings {
                name: self.name.clone(),
                seeds: vec![seed],
                epsilons: self.epsilons.clone(),
                eval_episodes: self.eval_episodes,
                eval_seed: self.eval_seed,
                out_dir: self.out_dir.display().to_string(),
                progress_every: self.progress_every,
            },
        };
        toml::to_string(&snap).map_err(|e| ConfigError::BadValue(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.world.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(ConfigError::Invariant("seed list must not be empty".into()));
        }
        if self.epsilons.is_empty() {
            return Err(ConfigError::Invariant("epsilon list must not be empty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0)) {
            return Err(ConfigError::Invariant(format!("epsilons must be > 0 (got {e})")));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(ConfigError::Invariant(format!(
                "experiment name must be a plain directory name (got `{}`)",
                self.name
            )));
        }
        Ok(())
    }
}

/// Reads a TOML experiment file. `None` loads the built-in defaults.
pub fn load_config(path: Option<&Path>, cli: &CliOverrides) -> Result<ExperimentSpec, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => String::new(),
    };
    parse_config(&text, cli)
}

/// Same as `load_config` on an in-memory document.
pub fn parse_config(text: &str, cli: &CliOverrides) -> Result<ExperimentSpec, ConfigError> {
    let mut file: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let file_profile = match file.remove("profile") {
        Some(Value::String(s)) => Some(s.parse::<Profile>()?),
        Some(other) => return Err(ConfigError::BadValue(format!("profile must be a string, got {other}"))),
        None => None,
    };
    let profile = cli.profile.or(file_profile).unwrap_or_default();
    resolve(profile, file, cli)
}

fn resolve(profile: Profile, mut file: Table, cli: &CliOverrides) -> Result<ExperimentSpec, ConfigError> {
    for key in file.keys() {
        if !matches!(key.as_str(), "world" | "train" | "experiment") {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    let world: WorldConfig = layer("world", &WorldConfig::default(), file.remove("world"))?;
    let mut train: TrainConfig = layer("train", &profile.train_defaults(), file.remove("train"))?;
    let exp: ExperimentSettings = layer("experiment", &ExperimentSettings::default(), file.remove("experiment"))?;

    let mut seeds = if exp.seeds.is_empty() { vec![train.seed] } else { exp.seeds };
    if let Some(s) = cli.seed {
        seeds = vec![s];
    }
    train.seed = seeds[0];
    if let Some(n) = cli.episodes {
        train.episodes = n;
    }
    let out_dir = match (&cli.out, exp.out_dir.is_empty()) {
        (Some(p), _) => p.clone(),
        (None, false) => PathBuf::from(exp.out_dir),
        (None, true) => default_out_root(),
    };
    let spec = ExperimentSpec {
        profile,
        world,
        train,
        name: exp.name,
        seeds,
        epsilons: exp.epsilons,
        eval_episodes: cli.eval_episodes.unwrap_or(exp.eval_episodes),
        eval_seed: exp.eval_seed,
        out_dir,
        progress_every: exp.progress_every,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT))
}

/// Overlays `file` on the serialized `base` and deserializes the result.
fn layer<T>(section: &str, base: &T, file: Option<Value>) -> Result<T, ConfigError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut merged = Value::try_from(base).map_err(|e| ConfigError::BadValue(format!("{section}: {e}")))?;
    if let Some(over) = file {
        let Value::Table(over) = over else {
            return Err(ConfigError::BadValue(format!("`{section}` must be a table")));
        };
        let Value::Table(base_table) = &mut merged else {
            unreachable!("config sections serialize to tables")
        };
        merge(section, base_table, over)?;
    }
    merged
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::BadValue(format!("{section}: {}", e.message())))
}

fn merge(prefix: &str, base: &mut Table, over: Table) -> Result<(), ConfigError> {
    for (key, value) in over {
        let path = format!("{prefix}.{key}");
        match (base.get_mut(&key), value) {
            (None, _) => return Err(ConfigError::UnknownKey(path)),
            (Some(Value::Table(b)), Value::Table(o)) => merge(&path, b, o)?,
            (Some(Value::Table(_)), _) => {
                return Err(ConfigError::BadValue(format!("`{path}` must be a table")));
            }
            (Some(slot), v) => {
                let compatible = slot.type_str() == v.type_str()
                    || matches!((&*slot, &v), (Value::Float(_), Value::Integer(_)));
                if !compatible {
                    return Err(ConfigError::BadValue(format!(
                        "`{path}` expects {}, got {}",
                        slot.type_str(),
                        v.type_str()
                    )));
                }
                *slot = v;
            }
        }
    }
    Ok(())
}

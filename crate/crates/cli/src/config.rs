//! TOML run configuration and `--set key=value` overrides.
//!
//! ```toml
//! [game]
//! algorithm = "many_experts"   # hedge | many_experts | meta_tuner
//! epsilon = 0.5                # required for many_experts
//! horizon = 5000               # optional, defaults to the environment's
//! seed = 7                     # optional when --seed is given
//! feedback = "expected"        # meta_tuner only: expected | realized
//!
//! [environment]
//! kind = "clustered_binary"
//! rounds = 5000
//! experts = 100000
//! clusters = 8
//! ```

use std::path::Path;

use manyexperts::environments::EnvironmentSpec;
use manyexperts::{Algorithm, FeedbackMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub feedback: FeedbackMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameSection,
    pub environment: EnvironmentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentOnly {
    #[serde(default)]
    pub game: Option<Table>,
    pub environment: EnvironmentSpec,
}

/// Reads a TOML file into a table and applies overrides.
pub fn load_table(path: &Path, overrides: &[String]) -> CliResult<Table> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    let mut table: Table = toml::from_str(&text).map_err(|source| CliError::Toml {
        path: path.to_path_buf(),
        source,
    })?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    Ok(table)
}

/// Applies one `dotted.key=value` override. The value is read as a TOML
/// literal when it parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(assignment, "overrides take the form key=value"))?;
    let value = parse_literal(raw.trim());
    set_path(table, key.trim(), value)
}

fn parse_literal(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set_path(table: &mut Table, key: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::config(key, "empty key"))?;
    let mut cur = table;
    for p in parts {
        cur = match cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
        {
            Value::Table(t) => t,
            _ => return Err(CliError::config(key, format!("`{p}` is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Deserializes a table; errors quote the offending line of the
/// (re-rendered) document.
pub fn decode<T: DeserializeOwned>(table: &Table, path: &Path) -> CliResult<T> {
    let text = toml::to_string(table).map_err(|e| CliError::config("<config>", e.to_string()))?;
    toml::from_str(&text).map_err(|source| CliError::Toml {
        path: path.to_path_buf(),
        source,
    })
}

/// Makes a relative matrix path relative to the config file's directory.
pub fn resolve_paths(spec: EnvironmentSpec, config_path: &Path) -> EnvironmentSpec {
    match spec {
        EnvironmentSpec::FiniteMatrix { path } if path.is_relative() => {
            let base = config_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default();
            EnvironmentSpec::FiniteMatrix {
                path: base.join(path),
            }
        }
        other => other,
    }
}

/// A fully resolved game: every field the run depends on, seed included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub algorithm: Algorithm,
    pub epsilon: Option<f64>,
    pub horizon: Option<usize>,
    pub seed: u64,
    pub feedback: FeedbackMode,
    pub environment: EnvironmentSpec,
}

impl ResolvedRun {
    pub fn new(
        game: &GameSection,
        environment: EnvironmentSpec,
        seed_flag: Option<u64>,
    ) -> CliResult<Self> {
        let seed = seed_flag.or(game.seed).ok_or_else(|| {
            CliError::config("game.seed", "no seed given in the config or via --seed")
        })?;
        let run = ResolvedRun {
            algorithm: game.algorithm,
            epsilon: game.epsilon,
            horizon: game.horizon,
            seed,
            feedback: game.feedback,
            environment: environment.with_default_seed(seed),
        };
        run.validate()?;
        Ok(run)
    }

    /// Checks everything that can be checked before generating the environment.
    pub fn validate(&self) -> CliResult<()> {
        match (self.algorithm, self.epsilon) {
            (Algorithm::ManyExperts, None) => {
                return Err(CliError::config(
                    "game.epsilon",
                    "many_experts needs an accuracy",
                ))
            }
            (_, Some(e)) if !(e.is_finite() && e > 0.0 && e <= 1.0) => {
                return Err(CliError::config(
                    "game.epsilon",
                    format!("{e} is not in (0, 1]"),
                ))
            }
            _ => {}
        }
        if self.horizon == Some(0) {
            return Err(CliError::config("game.horizon", "must be at least 1"));
        }
        if self.algorithm == Algorithm::MetaTuner && self.horizon == Some(1) {
            return Err(CliError::config(
                "game.horizon",
                "meta_tuner needs at least 2 rounds",
            ));
        }
        if let EnvironmentSpec::FiniteMatrix { path } = &self.environment {
            if !path.exists() {
                return Err(CliError::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("loss matrix {} not found", path.display()),
                )));
            }
        }
        Ok(())
    }
}

pub fn load_run(
    path: &Path,
    overrides: &[String],
    seed_flag: Option<u64>,
) -> CliResult<ResolvedRun> {
    let table = load_table(path, overrides)?;
    let config: RunConfig = decode(&table, path)?;
    ResolvedRun::new(
        &config.game,
        resolve_paths(config.environment, path),
        seed_flag,
    )
}

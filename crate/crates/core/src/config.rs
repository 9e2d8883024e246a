//! Run configuration: defaults, a TOML file, `DRIVECODE__SECTION__KEY`
//! environment overrides, then command-line flags, in increasing precedence.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{BenchmarkConfig, Method};
use crate::dynamics::PurePursuitConfig;
use crate::error::{Error, Result};
use crate::estimation::{FitConfig, ScoringConfig};
use crate::idm::{IdmBounds, IdmGlobals};
use crate::metrics::{AdeNormalization, PostCollision};
use crate::predictor::PredictConfig;
use crate::rollout::RolloutConfig;
use crate::scene::IngestConfig;

pub const ENV_PREFIX: &str = "DRIVECODE__";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmSection {
    pub phi: f64,
}

impl Default for IdmSection {
    fn default() -> Self {
        Self {
            phi: IdmGlobals::default().phi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub substeps: usize,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self { substeps: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub restarts: usize,
    pub fd_step: f64,
    pub max_iter: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    pub ade_target: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            restarts: f.restarts,
            fd_step: f.fd_step,
            max_iter: f.max_iter,
            memory: f.memory,
            grad_tol: f.grad_tol,
            f_tol: f.f_tol,
            ade_target: f.ade_target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub methods: String,
    pub ade_normalization: AdeNormalization,
    pub post_collision: PostCollision,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            methods: "constvel,avg,pred,oracle".into(),
            ade_normalization: AdeNormalization::default(),
            post_collision: PostCollision::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeSection {
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub scene: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Episode length in frames for fitting and evaluation.
    pub horizon: usize,
    pub idm: IdmSection,
    pub bounds: IdmBounds,
    pub pursuit: PurePursuitConfig,
    pub dynamics: DynamicsSection,
    pub fit: FitSection,
    pub predict: PredictConfig,
    pub eval: EvalSection,
    pub ingest: IngestConfig,
    pub runtime: RuntimeSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            horizon: 100,
            idm: IdmSection::default(),
            bounds: IdmBounds::default(),
            pursuit: PurePursuitConfig::default(),
            dynamics: DynamicsSection::default(),
            fit: FitSection::default(),
            predict: PredictConfig::default(),
            eval: EvalSection::default(),
            ingest: IngestConfig::default(),
            runtime: RuntimeSection::default(),
            paths: PathsSection::default(),
        }
    }
}

/// The subset of the configuration that determines artifact contents.
#[derive(Serialize)]
struct Echo<'a> {
    seed: u64,
    horizon: usize,
    idm: &'a IdmSection,
    bounds: &'a IdmBounds,
    pursuit: &'a PurePursuitConfig,
    dynamics: &'a DynamicsSection,
    fit: &'a FitSection,
    predict: &'a PredictConfig,
    eval: &'a EvalSection,
    ingest: &'a IngestConfig,
}

fn parse_scalar(raw: &str) -> toml::Value {
    // numbers, booleans and arrays parse as TOML; anything else is a string
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| Error::Config("empty override key".into()))?;
    let mut table = root;
    for key in parents {
        let entry = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{}` is not a section", path.join("."))))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

/// Parameter intervals from TOML, either top-level or under a `[bounds]` table.
pub fn parse_bounds(text: &str) -> Result<IdmBounds> {
    let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("bounds: {e}")))?;
    let inner = match table.remove("bounds") {
        Some(toml::Value::Table(t)) if table.is_empty() => t,
        Some(_) => return Err(Error::Config("bounds: unexpected keys next to [bounds]".into())),
        None => table,
    };
    toml::Value::Table(inner)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("bounds: {e}")))
}

impl RunConfig {
    /// Builds a configuration from an optional file plus environment overrides.
    pub fn load(file: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (key, value) in overrides {
            let path: Vec<String> = key[ENV_PREFIX.len()..]
                .split("__")
                .map(str::to_ascii_lowercase)
                .collect();
            let path = path.into_iter().map(|k| if k == "t" { "T".into() } else { k }).collect::<Vec<_>>();
            set_path(&mut table, &path, parse_scalar(&value))?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::Config("horizon must be at least 2".into()));
        }
        if !(self.idm.phi > 0.0) {
            return Err(Error::Config("idm.phi must be positive".into()));
        }
        if self.dynamics.substeps == 0 {
            return Err(Error::Config("dynamics.substeps must be at least 1".into()));
        }
        if !(self.ingest.dt > 0.0 && self.ingest.speed_limit > 0.0) {
            return Err(Error::Config("ingest.dt and ingest.speed_limit must be positive".into()));
        }
        self.pursuit.validate()?;
        self.predict.validate()?;
        self.fit_config().validate()?;
        self.methods()?;
        let p = &self.paths;
        for path in [&p.scene, &p.store, &p.test].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::Config(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        Method::parse_list(&self.eval.methods)
    }

    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            rollout: RolloutConfig {
                pursuit: self.pursuit,
                substeps: self.dynamics.substeps,
            },
            phi: self.idm.phi,
            ade: self.eval.ade_normalization,
            post_collision: self.eval.post_collision,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        let f = &self.fit;
        FitConfig {
            bounds: self.bounds,
            restarts: f.restarts,
            fd_step: f.fd_step,
            max_iter: f.max_iter,
            memory: f.memory,
            grad_tol: f.grad_tol,
            f_tol: f.f_tol,
            ade_target: f.ade_target,
            seed: self.seed,
            horizon: self.horizon,
        }
    }

    pub fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            scoring: self.scoring(),
            predict: self.predict,
            fit: self.fit_config(),
        }
    }

    /// TOML rendering of every setting that affects outputs. Runtime and path
    /// settings are left out, so artifacts do not depend on them.
    pub fn echo(&self) -> String {
        let echo = Echo {
            seed: self.seed,
            horizon: self.horizon,
            idm: &self.idm,
            bounds: &self.bounds,
            pursuit: &self.pursuit,
            dynamics: &self.dynamics,
            fit: &self.fit,
            predict: &self.predict,
            eval: &self.eval,
            ingest: &self.ingest,
        };
        toml::to_string(&echo).expect("configuration serialises")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }

    /// Header lines for output artifacts: the hash, then the echoed configuration.
    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("config_sha256={}", self.hash()), format!("seed={}", self.seed)];
        lines.extend(self.echo().lines().filter(|l| !l.is_empty()).map(|l| format!("config: {l}")));
        lines
    }
}

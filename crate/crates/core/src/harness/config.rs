use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};
use crate::model::{ActionSpace, RewardWeights};
use crate::policy::PolicyConfig;
use crate::sim::{ContextDistribution, Environment, EnvironmentSpec, MeanModel};
use crate::tree::TreeSchema;
use crate::uplift::EstimatorConfig;

/// Multiple of the environment's score scale that `optimistic_init` must
/// exceed, so an unexplored arm always outranks any resolved one.
pub const OPTIMISM_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSection {
    /// Levels from the root down; system levels first.
    pub levels: TreeSchema,
}

/// The ground-truth part of an environment; schema and bucket count come
/// from the enclosing config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub vocabularies: Vec<Vec<String>>,
    pub means: MeanModel,
    pub noise_sd: [f64; 3],
    pub contexts: ContextDistribution,
    #[serde(default)]
    pub shift_round: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub bucket_count: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Observation log to replay instead of simulating. Relative paths are
    /// resolved against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_log: Option<PathBuf>,
}

fn default_horizon() -> u64 {
    1000
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("hcub-out")
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: SchemaSection,
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSection>,
    pub run: RunSection,
}

/// What a config asks to run against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigMode {
    Environment,
    Replay,
}

impl RunConfig {
    pub fn schema(&self) -> &TreeSchema {
        &self.schema.levels
    }

    pub fn actions(&self) -> Result<ActionSpace> {
        ActionSpace::new(self.run.bucket_count)
    }

    pub fn mode(&self) -> ConfigMode {
        if self.environment.is_some() {
            ConfigMode::Environment
        } else {
            ConfigMode::Replay
        }
    }

    /// The environment spec, if this config simulates.
    pub fn environment_spec(&self) -> Option<EnvironmentSpec> {
        self.environment.as_ref().map(|e| EnvironmentSpec {
            schema: self.schema.levels.clone(),
            bucket_count: self.run.bucket_count,
            vocabularies: e.vocabularies.clone(),
            means: e.means.clone(),
            noise_sd: e.noise_sd,
            contexts: e.contexts.clone(),
            shift_round: e.shift_round,
            seed: e.seed,
        })
    }

    /// Checks every section and the cross-section rules. Errors name the
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        let field = |path: &str, e: HcubError| config_error(path, e.to_string());
        self.actions().map_err(|e| field("run.bucket_count", e))?;
        self.weights.validate().map_err(|e| field("weights", e))?;
        self.estimator.validate().map_err(|e| field("estimator", e))?;
        self.policy.validate().map_err(|e| field("policy", e))?;
        if self.run.horizon == 0 {
            return Err(config_error("run.horizon", "must be at least 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(config_error("run.seeds", "at least one seed is required"));
        }
        match (&self.environment, &self.run.replay_log) {
            (Some(_), Some(_)) => Err(config_error(
                "environment",
                "give either an [environment] section or run.replay_log, not both",
            )),
            (None, None) => Err(config_error(
                "environment",
                "an [environment] section or run.replay_log is required",
            )),
            (Some(_), None) => {
                let spec = self.environment_spec().expect("environment present");
                let env = Environment::build(&spec).map_err(|e| field("environment", e))?;
                let bound = env.score_scale(&self.weights) * OPTIMISM_MARGIN;
                self.policy
                    .validate_against(bound)
                    .map_err(|e| field("policy.optimistic_init", e))
            }
            (None, Some(_)) => Ok(()),
        }
    }

    /// Builds the environment of a simulating config.
    pub fn build_environment(&self) -> Result<Environment> {
        let spec = self
            .environment_spec()
            .ok_or_else(|| config_error("environment", "this config replays a log"))?;
        Environment::build(&spec)
    }
}

fn config_error(path: &str, message: impl Into<String>) -> HcubError {
    HcubError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parses and validates config text. `origin` labels errors and anchors a
/// relative `replay_log`.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| {
        let location = e
            .span()
            .map(|span| {
                let line = text[..span.start].matches('\n').count() + 1;
                format!("line {line}: ")
            })
            .unwrap_or_default();
        config_error(
            &origin.display().to_string(),
            format!("{location}{}", e.message()),
        )
    })?;
    if let Some(log) = &config.run.replay_log {
        if log.is_relative() {
            let base = origin.parent().unwrap_or_else(|| Path::new(""));
            config.run.replay_log = Some(base.join(log));
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(&path.display().to_string(), format!("cannot read: {e}")))?;
    parse_config_str(&text, path)
}

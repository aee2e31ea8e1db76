//! TOML configuration shared by the CLI and the bindings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor::{ActorError, EndpointConfig, PromptAssets};
use crate::orchestrator::LoopConfig;
use crate::solver::Solver;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Command line for the solver; discovered when absent.
    pub command: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub workers: usize,
    /// Directory of prompt assets overriding the built-in ones.
    pub prompts_dir: Option<PathBuf>,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection { workers: 1, prompts_dir: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub solver: SolverSection,
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    pub endpoint: EndpointConfig,
    pub bench: BenchSection,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.loop_config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if config.solver.command.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(ConfigError::Invalid("solver.command is empty".into()));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn solver(&self) -> Solver {
        self.loop_config.solver(self.solver.command.clone())
    }

    pub fn assets(&self) -> Result<PromptAssets, ActorError> {
        match &self.bench.prompts_dir {
            Some(dir) => PromptAssets::load(dir),
            None => Ok(PromptAssets::embedded()),
        }
    }
}

//! The structured run configuration shared by subcommands, with flag
//! overrides applied in `main`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tradecrew_core::agents::backend::{
    ChatBackend, LiveChatBackend, LiveConfig, ReplayBackend, SyntheticBackend,
};
use tradecrew_core::agents::{AgentRole, Granularity};
use tradecrew_core::analysis::{
    EmbeddingBackend, HttpEmbedder, HttpEmbedderConfig, OfflineEmbedder,
};
use tradecrew_core::Month;

/// Anything wrong with flags or the config file (exit code 2).
#[derive(Debug, Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

fn default_portfolio_sizes() -> Vec<usize> {
    vec![10, 20, 30, 40, 50]
}

fn default_trials() -> u32 {
    50
}

fn default_cost_bps() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BackendConfig {
    /// Deterministic synthetic script, or replay from a transcript
    /// directory when `transcript_dir` is set.
    Scripted {
        #[serde(skip_serializing_if = "Option::is_none", default)]
        transcript_dir: Option<PathBuf>,
    },
    /// HTTP chat-completions endpoint; the API key comes from the
    /// environment variable named by `api_key_env`.
    Live {
        endpoint: String,
        model: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        api_key_env: Option<String>,
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
}

fn default_temperature() -> f64 {
    1.0
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Scripted {
            transcript_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
#[derive(Default)]
pub enum EmbeddingsConfig {
    /// Seeded pseudo-embeddings (deterministic; default).
    #[default]
    Offline,
    /// HTTP embeddings endpoint, same wire pattern as the chat backend.
    Live {
        endpoint: String,
        #[serde(default = "default_embedding_model")]
        model: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        api_key_env: Option<String>,
    },
}

fn default_embedding_model() -> String {
    "text-embedding-3-small".to_string()
}

/// The structured run configuration (`--config` JSON file).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_root: PathBuf,
    /// Defaults to `<data_root>/universe.json`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub universe: Option<PathBuf>,
    /// First and last performance month (the months over which books are
    /// held). Decisions happen at the prior month-ends.
    pub start_month: Month,
    pub end_month: Month,
    #[serde(default = "default_granularity")]
    pub granularity: Granularity,
    /// Excluded roles (empty = all agents).
    #[serde(default)]
    pub mask: Vec<AgentRole>,
    #[serde(default = "default_portfolio_sizes")]
    pub portfolio_sizes: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_cost_bps")]
    pub cost_bps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub embeddings: EmbeddingsConfig,
    /// Tokens dropped from log-odds corpora.
    #[serde(default)]
    pub stopwords: Vec<String>,
}

fn default_granularity() -> Granularity {
    Granularity::Fine
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.start_month > self.end_month {
            return Err(ConfigError(format!(
                "start_month {} after end_month {}",
                self.start_month, self.end_month
            )));
        }
        for n in &self.portfolio_sizes {
            if *n == 0 || n % 2 != 0 {
                return Err(ConfigError(format!("portfolio size {n} must be even")));
            }
        }
        if self.trials < 1 {
            return Err(ConfigError("trials must be >= 1".into()));
        }
        for role in &self.mask {
            if !AgentRole::MASKABLE.contains(role) {
                return Err(ConfigError(format!("role {role} cannot be masked")));
            }
        }
        Ok(())
    }

    pub fn universe_path(&self) -> PathBuf {
        self.universe
            .clone()
            .unwrap_or_else(|| self.data_root.join("universe.json"))
    }

    pub fn chat_backend(&self) -> Result<Box<dyn ChatBackend>, ConfigError> {
        match &self.backend {
            BackendConfig::Scripted { transcript_dir } => match transcript_dir {
                Some(dir) => Ok(Box::new(ReplayBackend::new(dir.clone()))),
                None => Ok(Box::new(SyntheticBackend)),
            },
            BackendConfig::Live {
                endpoint,
                model,
                api_key_env,
                temperature,
            } => {
                let api_key = match api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        ConfigError(format!("environment variable {var} is not set"))
                    })?),
                    None => None,
                };
                let backend = LiveChatBackend::new(LiveConfig {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    api_key,
                    temperature: *temperature,
                    max_retries: 2,
                })
                .map_err(|e| ConfigError(e.to_string()))?;
                Ok(Box::new(backend))
            }
        }
    }

    pub fn embedding_backend(&self) -> Result<Box<dyn EmbeddingBackend>, ConfigError> {
        match &self.embeddings {
            EmbeddingsConfig::Offline => Ok(Box::new(OfflineEmbedder::new(self.seed))),
            EmbeddingsConfig::Live {
                endpoint,
                model,
                api_key_env,
            } => {
                let api_key = match api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        ConfigError(format!("environment variable {var} is not set"))
                    })?),
                    None => None,
                };
                let embedder = HttpEmbedder::new(HttpEmbedderConfig {
                    endpoint: endpoint.clone(),
                    model: model.clone(),
                    api_key,
                    max_retries: 2,
                })
                .map_err(|e| ConfigError(e.to_string()))?;
                Ok(Box::new(embedder))
            }
        }
    }
}

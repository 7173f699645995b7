//! Run configuration, loadable from TOML or JSON.
//!
//! One file holds every knob that affects results: the chat endpoint,
//! prompt/temperature grid, retry policy, split and baseline
//! hyperparameters, and the mock-backend switch. The runner snapshots
//! the effective config into each run directory so a run can be
//! re-analysed without the original file.

use crate::baselines::{LogisticParams, SplitSpec};
use crate::gateway::GatewayConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse config file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Feature extraction backend for the classical baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureConfig {
    /// Bag-of-words TF-IDF built from the training split.
    Tfidf { max_vocab: usize },
    /// Pre-computed or fetched embedding vectors.
    Embeddings {
        /// JSONL file of row vectors; when absent, vectors are fetched
        /// from the embeddings endpoint.
        path: Option<PathBuf>,
        model: String,
        dim: usize,
        /// Embeddings API endpoint, used only when `path` is absent.
        #[serde(default = "default_embeddings_endpoint")]
        endpoint: String,
    },
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig::Tfidf { max_vocab: 2000 }
    }
}

fn default_embeddings_endpoint() -> String {
    "https://api.openai.com/v1/embeddings".to_string()
}

/// Scripted-backend settings for offline runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub enabled: bool,
    /// JSONL rules file: `{"user_contains": ..., "response": ...}` per line.
    pub responses_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    /// Prompt ids from the built-in catalog (plus any loaded from
    /// `prompt_file`).
    pub prompts: Vec<String>,
    /// Optional TOML/JSON file with additional prompt specs.
    pub prompt_file: Option<PathBuf>,
    pub temperatures: Vec<f64>,
    pub max_tokens: u32,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    /// Response cache location; `None` means a `cache.jsonl` shared
    /// under the output root so repeated grids reuse completions.
    pub cache_path: Option<PathBuf>,
    pub seed: u64,
    /// Minimum review length (in words) enforced at ingest.
    pub min_words: usize,
    /// Votes required for majority-vote reconciliation.
    pub quorum: usize,
    pub split: SplitSpec,
    pub logistic: LogisticParams,
    pub features: FeatureConfig,
    pub mock: MockConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4o-mini".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            prompts: vec!["P1".to_string(), "P2".to_string(), "P3".to_string()],
            prompt_file: None,
            temperatures: vec![0.2, 0.7, 1.3],
            max_tokens: 512,
            max_in_flight: 8,
            max_retries: 3,
            backoff_base_ms: 500,
            cache_path: None,
            seed: 42,
            min_words: 10,
            quorum: 2,
            split: SplitSpec::default(),
            logistic: LogisticParams::default(),
            features: FeatureConfig::default(),
            mock: MockConfig::default(),
        }
    }
}

impl RunConfig {
    /// Loads a config file, inferring the format from the extension
    /// (`.toml` / `.json`); unknown extensions try TOML first.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let config = Self::parse(&text, path)?;
        config.validate()?;
        Ok(config)
    }

    fn parse(text: &str, path: &Path) -> Result<RunConfig, ConfigError> {
        let extension = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let parse_error = |message: String| ConfigError::Parse {
            path: path.display().to_string(),
            message,
        };
        match extension.as_str() {
            "json" => serde_json::from_str(text).map_err(|e| parse_error(e.to_string())),
            "toml" => toml::from_str(text).map_err(|e| parse_error(e.to_string())),
            _ => toml::from_str(text)
                .or_else(|toml_err| {
                    serde_json::from_str(text)
                        .map_err(|json_err| format!("not TOML ({toml_err}) nor JSON ({json_err})"))
                })
                .map_err(parse_error),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.prompts.is_empty() {
            return Err(ConfigError::Invalid("prompts list is empty".into()));
        }
        if self.temperatures.is_empty() {
            return Err(ConfigError::Invalid("temperatures list is empty".into()));
        }
        for &t in &self.temperatures {
            if !t.is_finite() || !(0.0..=2.0).contains(&t) {
                return Err(ConfigError::Invalid(format!(
                    "temperature {t} outside [0, 2]"
                )));
            }
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::Invalid("max_tokens must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::Invalid("max_in_flight must be positive".into()));
        }
        if self.quorum == 0 {
            return Err(ConfigError::Invalid("quorum must be positive".into()));
        }
        if !self.split.train_fraction.is_finite()
            || self.split.train_fraction <= 0.0
            || self.split.train_fraction >= 1.0
        {
            return Err(ConfigError::Invalid(format!(
                "split.train_fraction {} outside (0, 1)",
                self.split.train_fraction
            )));
        }
        if let FeatureConfig::Tfidf { max_vocab } = &self.features {
            if *max_vocab == 0 {
                return Err(ConfigError::Invalid(
                    "features.max_vocab must be positive".into(),
                ));
            }
        }
        if let FeatureConfig::Embeddings { dim, .. } = &self.features {
            if *dim == 0 {
                return Err(ConfigError::Invalid(
                    "features.dim must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Gateway settings derived from this config; `cache_path` is
    /// resolved by the runner, which knows the output root.
    pub fn gateway_config(&self, cache_path: Option<PathBuf>) -> GatewayConfig {
        GatewayConfig {
            endpoint_url: self.endpoint.clone(),
            api_key_env_var: self.api_key_env.clone(),
            max_retries: self.max_retries,
            backoff_base_ms: self.backoff_base_ms,
            max_in_flight: self.max_in_flight,
            cache_path,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

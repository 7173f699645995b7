//! Chat-completion client with pluggable backends, response caching,
//! bounded retries, and a shared in-flight limit.
//!
//! The gateway is the only part of the toolkit that talks to a model.
//! Everything downstream consumes `ChatResponse.raw_text`, so swapping
//! the HTTP backend for the deterministic mock (or replaying a cache
//! file with no backend at all) changes nothing else.

mod cache;
mod http;
mod mock;

pub use cache::{CacheEntry, ResponseCache};
pub use http::HttpBackend;
pub use mock::{MockBackend, MockDefault};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;
use tokio::sync::Semaphore;

/// One single-turn request. Temperature is a grid axis in the
/// experiments, so it participates in identity (and the cache key).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub system_message: String,
    pub user_message: String,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) || !self.temperature.is_finite() {
            return Err(GatewayError::InvalidRequest {
                detail: format!("temperature {} outside [0, 2]", self.temperature),
            });
        }
        if self.system_message.is_empty() || self.user_message.is_empty() {
            return Err(GatewayError::InvalidRequest {
                detail: "system and user messages must be non-empty".to_string(),
            });
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest {
                detail: "max_tokens must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// The assistant reply, unprocessed. `latency_ms` and `from_cache` are
/// operational metadata; reports never include them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub raw_text: String,
    pub model_echo: String,
    pub latency_ms: u64,
    pub from_cache: bool,
}

/// Operational settings. The API key itself is read from the named
/// environment variable at backend construction and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub api_key_env_var: String,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
    pub cache_path: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".to_string(),
            api_key_env_var: "OPENAI_API_KEY".to_string(),
            max_retries: 3,
            backoff_base_ms: 500,
            max_in_flight: 8,
            cache_path: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("AUTH_FAILED: the backend rejected the API credentials")]
    AuthFailed,
    #[error("RETRIES_EXHAUSTED after {attempts} attempts; last error: {last_error}")]
    RetriesExhausted { attempts: u32, last_error: String },
    #[error("MALFORMED_BACKEND_REPLY: {detail}")]
    MalformedBackendReply { detail: String },
    #[error("BACKEND_REJECTED: {detail}")]
    Rejected { detail: String },
    #[error("INVALID_REQUEST: {detail}")]
    InvalidRequest { detail: String },
    #[error("MISSING_API_KEY: environment variable {env_var} is not set")]
    MissingApiKey { env_var: String },
    #[error("CACHE_IO: {0}")]
    CacheIo(String),
}

/// What a backend hands back on success.
#[derive(Debug, Clone)]
pub struct BackendReply {
    pub raw_text: String,
    pub model_echo: String,
}

/// Backend failure, classified for the retry loop. Only `Transient`
/// is retried.
#[derive(Debug, Clone)]
pub enum BackendError {
    /// 401/403 — retrying the same credentials cannot help.
    Auth,
    /// 429, 5xx, timeouts, connection failures.
    Transient { detail: String },
    /// 2xx with a body that does not parse as a chat completion.
    Malformed { detail: String },
    /// Any other definitive rejection.
    Permanent { detail: String },
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError>;
    /// Short human-readable identity, recorded in run metadata.
    fn describe(&self) -> String;
}

/// Deterministic digest over the request fields that define identity:
/// (model, temperature, system_message, user_message, max_tokens).
/// Fields are length-prefixed before hashing so no two field sequences
/// can collide by concatenation. Temperature is rendered with Rust's
/// shortest-round-trip float formatting, which is stable across
/// platforms and process restarts.
pub fn cache_key(request: &ChatRequest) -> String {
    let temperature = request.temperature.to_string();
    let max_tokens = request.max_tokens.to_string();
    let fields = [
        request.model.as_str(),
        temperature.as_str(),
        request.system_message.as_str(),
        request.user_message.as_str(),
        max_tokens.as_str(),
    ];
    let mut hasher = Sha256::new();
    for field in fields {
        hasher.update((field.len() as u64).to_be_bytes());
        hasher.update(field.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Audit digest stored alongside each cache entry: a hash of the JSON
/// rendering of the same five fields.
fn request_digest_inputs_hash(request: &ChatRequest) -> String {
    let json = serde_json::to_string(request).expect("request serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// The client facade: cache check, bounded retries with exponential
/// backoff and jitter, and a semaphore capping concurrent backend calls.
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    config: GatewayConfig,
    cache: Option<Mutex<ResponseCache>>,
    limiter: Arc<Semaphore>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, config: GatewayConfig) -> Result<Self, GatewayError> {
        if config.max_in_flight == 0 {
            return Err(GatewayError::InvalidRequest {
                detail: "max_in_flight must be positive".to_string(),
            });
        }
        let cache = match &config.cache_path {
            Some(path) => Some(Mutex::new(
                ResponseCache::open(path).map_err(|e| GatewayError::CacheIo(e.to_string()))?,
            )),
            None => None,
        };
        Ok(Gateway {
            backend,
            limiter: Arc::new(Semaphore::new(config.max_in_flight)),
            config,
            cache,
        })
    }

    pub fn backend_description(&self) -> String {
        self.backend.describe()
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Number of distinct cached responses currently loaded.
    pub fn cache_len(&self) -> usize {
        self.cache
            .as_ref()
            .map_or(0, |c| c.lock().expect("cache lock").len())
    }

    /// Completes one request: cache first, then the backend with up to
    /// `max_retries` retries on transient failures.
    pub async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let key = cache_key(request);

        if let Some(cache) = &self.cache {
            let hit = cache.lock().expect("cache lock").get(&key).cloned();
            if let Some(entry) = hit {
                return Ok(ChatResponse {
                    raw_text: entry.raw_text,
                    model_echo: entry.model,
                    latency_ms: 0,
                    from_cache: true,
                });
            }
        }

        let started = Instant::now();
        let mut attempts = 0;
        let reply = loop {
            attempts += 1;
            let outcome = {
                let _permit = self
                    .limiter
                    .acquire()
                    .await
                    .expect("limiter never closed");
                self.backend.send(request).await
            };
            match outcome {
                Ok(reply) => break reply,
                Err(BackendError::Auth) => return Err(GatewayError::AuthFailed),
                Err(BackendError::Malformed { detail }) => {
                    return Err(GatewayError::MalformedBackendReply { detail })
                }
                Err(BackendError::Permanent { detail }) => {
                    return Err(GatewayError::Rejected { detail })
                }
                Err(BackendError::Transient { detail }) => {
                    if attempts > self.config.max_retries {
                        return Err(GatewayError::RetriesExhausted {
                            attempts,
                            last_error: detail,
                        });
                    }
                    tokio::time::sleep(self.backoff(attempts)).await;
                }
            }
        };

        let response = ChatResponse {
            raw_text: reply.raw_text,
            model_echo: reply.model_echo,
            latency_ms: started.elapsed().as_millis() as u64,
            from_cache: false,
        };

        if let Some(cache) = &self.cache {
            let entry = CacheEntry {
                key,
                request_digest_inputs_hash: request_digest_inputs_hash(request),
                raw_text: response.raw_text.clone(),
                model: response.model_echo.clone(),
                timestamp: chrono::Utc::now().to_rfc3339(),
            };
            cache
                .lock()
                .expect("cache lock")
                .put(entry)
                .map_err(|e| GatewayError::CacheIo(e.to_string()))?;
        }
        Ok(response)
    }

    /// Completes many requests concurrently. Results are positionally
    /// aligned with the input; failures are embedded per item, never
    /// aborting the batch. The shared semaphore keeps at most
    /// `max_in_flight` backend calls outstanding.
    pub async fn complete_batch(
        &self,
        requests: &[ChatRequest],
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        futures::future::join_all(requests.iter().map(|r| self.complete(r))).await
    }

    fn backoff(&self, attempt: u32) -> Duration {
        use rand::Rng;
        let base = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(10));
        let jitter = rand::rng().random_range(0..=self.config.backoff_base_ms.max(1) / 2);
        Duration::from_millis(base.saturating_add(jitter))
    }
}

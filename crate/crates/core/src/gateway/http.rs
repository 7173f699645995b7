//! OpenAI-compatible HTTP backend.
//!
//! Speaks the chat-completions wire format: POST a JSON body of
//! `{model, temperature, max_tokens, messages}` and read
//! `choices[0].message.content` back. Any endpoint implementing that
//! contract works — the tests run one in-process.
//!
//! The API key lives only in this struct and in the Authorization
//! header. Error details pass through `scrub`, so the key cannot leak
//! into logs, cache files, or error messages even if an upstream
//! library echoes request data.

use super::{BackendError, BackendReply, ChatBackend, ChatRequest, GatewayError};
use async_trait::async_trait;
use serde::Deserialize;
use std::time::Duration;

pub struct HttpBackend {
    client: reqwest::Client,
    endpoint_url: String,
    api_key: String,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint_url", &self.endpoint_url)
            .field("api_key", &"[redacted]")
            .finish()
    }
}

#[derive(Deserialize)]
struct Completion {
    model: Option<String>,
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl HttpBackend {
    pub fn new(endpoint_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("default TLS configuration is available");
        HttpBackend {
            client,
            endpoint_url: endpoint_url.into(),
            api_key: api_key.into(),
        }
    }

    /// Reads the API key from the named environment variable; the key
    /// is never written anywhere.
    pub fn from_env(
        endpoint_url: impl Into<String>,
        api_key_env_var: &str,
    ) -> Result<Self, GatewayError> {
        let api_key = std::env::var(api_key_env_var).map_err(|_| GatewayError::MissingApiKey {
            env_var: api_key_env_var.to_string(),
        })?;
        Ok(HttpBackend::new(endpoint_url, api_key))
    }

    fn scrub(&self, text: &str) -> String {
        if self.api_key.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.api_key, "[redacted]")
        }
    }
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError> {
        let body = serde_json::json!({
            "model": request.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [
                {"role": "system", "content": request.system_message},
                {"role": "user", "content": request.user_message},
            ],
        });

        let response = self
            .client
            .post(&self.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .await
            .map_err(|e| BackendError::Transient {
                detail: self.scrub(&e.to_string()),
            })?;

        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth);
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient {
                detail: format!("HTTP {status}"),
            });
        }
        if !status.is_success() {
            let snippet: String = response
                .text()
                .await
                .unwrap_or_default()
                .chars()
                .take(200)
                .collect();
            return Err(BackendError::Permanent {
                detail: self.scrub(&format!("HTTP {status}: {snippet}")),
            });
        }

        let text = response.text().await.map_err(|e| BackendError::Transient {
            detail: self.scrub(&e.to_string()),
        })?;
        match serde_json::from_str::<Completion>(&text) {
            Ok(completion) => match completion.choices.into_iter().next() {
                Some(choice) => Ok(BackendReply {
                    raw_text: choice.message.content,
                    model_echo: completion.model.unwrap_or_else(|| request.model.clone()),
                }),
                None => Err(BackendError::Malformed {
                    detail: "completion body has an empty choices array".to_string(),
                }),
            },
            Err(e) => Err(BackendError::Malformed {
                detail: self.scrub(&format!("completion body does not parse: {e}")),
            }),
        }
    }

    fn describe(&self) -> String {
        format!("openai-compatible endpoint at {}", self.endpoint_url)
    }
}

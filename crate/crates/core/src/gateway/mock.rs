//! Deterministic stand-in backend.
//!
//! Three layers decide a reply, first match wins:
//!  1. exact scripts keyed by the request's cache key,
//!  2. substring rules matched against the user message (how test
//!     fixtures script per-review answers without rebuilding requests),
//!  3. the default mode.
//!
//! Faults can be queued per request — each queued fault is consumed by
//! one backend call, after which the reply layers take over. The mock
//! also counts calls and tracks peak concurrent entries so tests can
//! assert retry bounds and in-flight limits.

use super::{cache_key, BackendError, BackendReply, ChatBackend, ChatRequest};
use async_trait::async_trait;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

/// What the mock answers when nothing was scripted for a request.
#[derive(Debug, Clone)]
pub enum MockDefault {
    /// A deterministic label display name derived from the request
    /// digest. Self-consistent across calls and processes.
    HashLabel,
    /// A fixed reply for every request.
    Fixed(String),
    /// Text no extractor can parse; exercises the unparsed path.
    Unparsed,
}

/// One scripted reply rule loaded from a responses file.
#[derive(Debug, Clone, Deserialize)]
struct ScriptedRule {
    /// Substring of the user message this rule applies to.
    user_contains: String,
    response: String,
}

pub struct MockBackend {
    scripts: Mutex<HashMap<String, String>>,
    substring_rules: Mutex<Vec<(String, String)>>,
    faults: Mutex<HashMap<String, VecDeque<BackendError>>>,
    default: MockDefault,
    delay: Option<Duration>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
}

impl MockBackend {
    pub fn new(default: MockDefault) -> Self {
        MockBackend {
            scripts: Mutex::new(HashMap::new()),
            substring_rules: Mutex::new(Vec::new()),
            faults: Mutex::new(HashMap::new()),
            default,
            delay: None,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak_in_flight: AtomicUsize::new(0),
        }
    }

    /// Adds an artificial per-call delay, so concurrency tests actually
    /// overlap calls.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    /// Scripts the reply for exactly this request.
    pub fn seed_response(&self, request: &ChatRequest, response: &str) {
        self.scripts
            .lock()
            .expect("scripts lock")
            .insert(cache_key(request), response.to_string());
    }

    /// Scripts a reply for any request whose user message contains the
    /// given substring. Rules match in insertion order.
    pub fn seed_substring_rule(&self, user_contains: &str, response: &str) {
        self.substring_rules
            .lock()
            .expect("rules lock")
            .push((user_contains.to_string(), response.to_string()));
    }

    /// Queues faults for this request; each backend call consumes one
    /// until the queue is empty.
    pub fn seed_faults(&self, request: &ChatRequest, faults: Vec<BackendError>) {
        self.faults
            .lock()
            .expect("faults lock")
            .entry(cache_key(request))
            .or_default()
            .extend(faults);
    }

    /// Loads substring rules from a JSONL file of
    /// `{"user_contains": "...", "response": "..."}` lines.
    pub fn load_rules_jsonl(&self, content: &str) -> Result<usize, serde_json::Error> {
        let mut n = 0;
        for line in content.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let rule: ScriptedRule = serde_json::from_str(line)?;
            self.seed_substring_rule(&rule.user_contains, &rule.response);
            n += 1;
        }
        Ok(n)
    }

    /// Total backend invocations (including ones that returned faults).
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Highest number of concurrently outstanding calls observed.
    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }

    fn reply_for(&self, request: &ChatRequest) -> String {
        let key = cache_key(request);
        if let Some(text) = self.scripts.lock().expect("scripts lock").get(&key) {
            return text.clone();
        }
        for (needle, response) in self.substring_rules.lock().expect("rules lock").iter() {
            if request.user_message.contains(needle) {
                return response.clone();
            }
        }
        match &self.default {
            MockDefault::Fixed(text) => text.clone(),
            MockDefault::Unparsed => "mock backend has no scripted reply for this request".to_string(),
            MockDefault::HashLabel => {
                let digest = Sha256::digest(key.as_bytes());
                let names = ["functional", "non-functional", "both", "neither"];
                names[digest[0] as usize % names.len()].to_string()
            }
        }
    }
}

#[async_trait]
impl ChatBackend for MockBackend {
    async fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak_in_flight.fetch_max(now, Ordering::SeqCst);

        if let Some(delay) = self.delay {
            tokio::time::sleep(delay).await;
        }

        let fault = self
            .faults
            .lock()
            .expect("faults lock")
            .get_mut(&cache_key(request))
            .and_then(VecDeque::pop_front);

        let outcome = match fault {
            Some(error) => Err(error),
            None => Ok(BackendReply {
                raw_text: self.reply_for(request),
                model_echo: request.model.clone(),
            }),
        };

        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        outcome
    }

    fn describe(&self) -> String {
        "mock backend (deterministic)".to_string()
    }
}

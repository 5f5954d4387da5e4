//! Chat-completion client: OpenAI-compatible wire format, retry with
//! exponential backoff and full jitter, a persistent JSONL response cache,
//! and a fixture-driven mock backend for offline runs.

mod cache;
mod http;
mod mock;

pub use cache::{CacheEntry, CacheStore};
pub use http::HttpBackend;
pub use mock::{MockBackend, MockEntry};

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::RenderedPrompt;

/// Environment variable holding the bearer token for HTTP endpoints.
pub const API_KEY_ENV_VAR: &str = "PATLAND_API_KEY";

/// Endpoint scheme that selects the fixture-driven mock backend.
pub const MOCK_SCHEME: &str = "mock:";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Base URL; requests go to `{endpoint_url}/chat/completions`. The
    /// scheme `mock:` selects the fixture-driven mock backend.
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_request_timeout_secs")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
}

fn default_max_output_tokens() -> u32 {
    1024
}

fn default_request_timeout_secs() -> u64 {
    30
}

fn default_max_retries() -> u32 {
    3
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            model_name: String::new(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            request_timeout_secs: default_request_timeout_secs(),
            max_retries: default_max_retries(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        if self.endpoint_url.trim().is_empty() {
            return Err(ClientError::Config("endpoint_url is empty".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(ClientError::Config("model_name is empty".into()));
        }
        if self.max_retries > 10 {
            return Err(ClientError::Config(format!(
                "max_retries {} exceeds the limit of 10",
                self.max_retries
            )));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ClientError::Config(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Result of one completion call.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub text: String,
    pub prompt_hash: String,
    pub model_name: String,
    pub from_cache: bool,
    /// Network attempts performed; 0 on a cache hit.
    pub attempts: u32,
    pub latency: Duration,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("API error {status}: {body}")]
    Api { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("cache I/O failure: {0}")]
    Cache(#[from] std::io::Error),
    #[error("mock fixture: {0}")]
    MockFixture(String),
}

/// What one request attempt produced, before retry policy is applied.
#[derive(Debug)]
pub enum BackendResult {
    /// 2xx with the assistant message content extracted.
    Content(String),
    /// Non-2xx HTTP status.
    HttpFailure { status: u16, body: String },
    /// The request timed out (retryable).
    TimedOut(String),
    /// The request never reached the server (retryable).
    ConnectFailed(String),
    /// 2xx whose JSON lacks `choices[0].message.content` (not retryable).
    Malformed(String),
}

/// A completion transport. Implementations must be safe to call from
/// multiple threads; `batch_complete` shares one backend across workers.
pub trait Backend: Send + Sync {
    fn send(&self, prompt_text: &str, config: &ModelConfig) -> BackendResult;
}

/// Picks the backend for a config: `mock:` endpoints read a fixture file
/// (path taken from the endpoint after the scheme, or from `mock_fixture`),
/// anything else goes over HTTP.
pub fn backend_for(
    config: &ModelConfig,
    mock_fixture: Option<&Path>,
) -> Result<Box<dyn Backend>, ClientError> {
    if let Some(rest) = config.endpoint_url.strip_prefix(MOCK_SCHEME) {
        let inline = rest.trim();
        let path = if inline.is_empty() {
            mock_fixture.ok_or_else(|| {
                ClientError::MockFixture(
                    "endpoint scheme is mock: but no fixture path was provided".into(),
                )
            })?
        } else {
            Path::new(inline)
        };
        Ok(Box::new(MockBackend::from_fixture_file(path)?))
    } else {
        Ok(Box::new(HttpBackend::from_env(Duration::from_secs(
            config.request_timeout_secs,
        ))?))
    }
}

/// 256-bit digest of (prompt text, model name, temperature), hex encoded.
/// This keys both the response cache and mock fixtures.
pub fn hash_prompt(text: &str, model_name: &str, temperature: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.update([0u8]);
    hasher.update(model_name.as_bytes());
    hasher.update([0u8]);
    hasher.update(temperature.to_le_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..=599).contains(&status)
}

/// Backoff before the next attempt after `completed` failed attempts:
/// uniform in [d, 2d] with d = 1s * 2^(completed-1).
fn backoff_delay(completed: u32) -> Duration {
    let base = 2f64.powi(completed.saturating_sub(1) as i32);
    let jitter: f64 = rand::rng().random_range(0.0..=1.0);
    Duration::from_secs_f64(base * (1.0 + jitter))
}

/// Submits one prompt. Cache hits return immediately with no network
/// activity; misses retry transient failures (timeouts, 429, 5xx) up to
/// `max_retries` times and store the successful response.
pub fn complete(
    prompt: &RenderedPrompt,
    config: &ModelConfig,
    cache: &CacheStore,
    backend: &dyn Backend,
) -> Result<CompletionResult, ClientError> {
    config.validate()?;
    let start = Instant::now();
    let prompt_hash = hash_prompt(&prompt.text, &config.model_name, config.temperature);

    if let Some(entry) = cache.get(&prompt_hash) {
        return Ok(CompletionResult {
            text: entry.response_text,
            prompt_hash,
            model_name: entry.model_name,
            from_cache: true,
            attempts: 0,
            latency: start.elapsed(),
        });
    }

    let max_attempts = 1 + config.max_retries;
    let mut attempts = 0;
    loop {
        attempts += 1;
        let failure = match backend.send(&prompt.text, config) {
            BackendResult::Content(text) => {
                cache.insert(CacheEntry::new(
                    prompt_hash.clone(),
                    text.clone(),
                    config.model_name.clone(),
                ));
                return Ok(CompletionResult {
                    text,
                    prompt_hash,
                    model_name: config.model_name.clone(),
                    from_cache: false,
                    attempts,
                    latency: start.elapsed(),
                });
            }
            BackendResult::HttpFailure { status, body } if retryable_status(status) => {
                format!("HTTP {status}: {body}")
            }
            BackendResult::HttpFailure { status, body } => {
                return Err(ClientError::Api { status, body });
            }
            BackendResult::TimedOut(detail) => format!("timeout: {detail}"),
            BackendResult::ConnectFailed(detail) => format!("connect: {detail}"),
            BackendResult::Malformed(detail) => {
                return Err(ClientError::MalformedResponse(detail));
            }
        };
        if attempts >= max_attempts {
            return Err(ClientError::Transport {
                attempts,
                detail: failure,
            });
        }
        std::thread::sleep(backoff_delay(attempts));
    }
}

/// Runs completions for a batch with at most `max_in_flight` requests
/// outstanding. Output order matches input order; one prompt's failure never
/// aborts the batch.
pub fn batch_complete(
    prompts: &[(String, RenderedPrompt)],
    config: &ModelConfig,
    cache: &CacheStore,
    backend: &dyn Backend,
    max_in_flight: usize,
) -> Vec<(String, Result<CompletionResult, ClientError>)> {
    let workers = max_in_flight.max(1).min(prompts.len());
    let slots: Vec<Mutex<Option<Result<CompletionResult, ClientError>>>> =
        prompts.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                let Some((_, prompt)) = prompts.get(index) else {
                    break;
                };
                let result = complete(prompt, config, cache, backend);
                *slots[index].lock().expect("result slot") = Some(result);
            });
        }
    });

    prompts
        .iter()
        .zip(slots)
        .map(|((id, _), slot)| {
            let result = slot
                .into_inner()
                .expect("result slot")
                .expect("worker filled every claimed slot");
            (id.clone(), result)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_deterministic_and_input_sensitive() {
        let a = hash_prompt("text", "model", 0.0);
        assert_eq!(a, hash_prompt("text", "model", 0.0));
        assert_eq!(a.len(), 64);
        assert_ne!(a, hash_prompt("text!", "model", 0.0));
        assert_ne!(a, hash_prompt("text", "model2", 0.0));
        assert_ne!(a, hash_prompt("text", "model", 0.5));
    }

    #[test]
    fn config_validation() {
        let mut config = ModelConfig {
            endpoint_url: "mock:".into(),
            model_name: "m".into(),
            ..ModelConfig::default()
        };
        assert!(config.validate().is_ok());
        config.max_retries = 11;
        assert!(config.validate().is_err());
        config.max_retries = 2;
        config.temperature = 1.5;
        assert!(config.validate().is_err());
        config.temperature = 0.0;
        config.endpoint_url = " ".into();
        assert!(config.validate().is_err());
    }

    #[test]
    fn backoff_delay_stays_in_doubling_window() {
        for completed in 1..=3u32 {
            let d = 2f64.powi(completed as i32 - 1);
            for _ in 0..50 {
                let delay = backoff_delay(completed).as_secs_f64();
                assert!(delay >= d && delay <= 2.0 * d, "attempt {completed}: {delay}");
            }
        }
    }
}

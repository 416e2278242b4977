//! Uniform chat-completion access.
//!
//! A [`Gateway`] wraps one [`ChatProvider`] (an HTTP backend or the
//! scriptable [`MockProvider`]) and layers on the operational machinery every
//! strategy shares: a content-addressed disk cache keyed by the full request
//! (plus a sample index, so sampled reasoning paths are never collapsed),
//! bounded retries with exponential backoff on transient failures, and
//! sliding-window rate limiting.

mod cache;
mod limiter;
mod mock;
mod provider;

pub use cache::{CachedResponse, ResponseCache};
pub use limiter::{Clock, ManualClock, RateLimiter, SystemClock};
pub use mock::{always_first_slot, date_aware_judge, MockProvider};
pub use provider::{ChatProvider, HttpProvider, ProviderReply};

use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Errors surfaced by [`Gateway::chat`].
#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transient provider failure after {attempts} attempt(s): {message}")]
    Transient { message: String, attempts: u32 },
    #[error("permanent provider failure: {message}")]
    Permanent { message: String },
    #[error("mock script exhausted")]
    ScriptExhausted,
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Message author role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// One chat message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// A chat-completion request. `request_tag` is an opaque trial identifier
/// carried through for logging; `sample_index` distinguishes repeated
/// sampling of the same prompt (self-consistency paths) in the cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub request_tag: String,
    pub sample_index: u32,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            model_id: model_id.into(),
            messages,
            temperature: None,
            max_tokens: None,
            request_tag: String::new(),
            sample_index: 0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = Some(temperature);
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = Some(max_tokens);
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.request_tag = tag.into();
        self
    }

    pub fn with_sample_index(mut self, sample_index: u32) -> Self {
        self.sample_index = sample_index;
        self
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages must be non-empty".into()));
        }
        if self.messages[0].role == Role::Assistant {
            return Err(GatewayError::InvalidRequest(
                "first message role must be system or user".into(),
            ));
        }
        if self.temperature.is_some_and(|t| !(t >= 0.0)) {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// Content-addressed cache key over everything that affects the
    /// completion: model, messages, temperature (by bit pattern), max_tokens,
    /// and sample index. The request tag is deliberately excluded.
    pub fn cache_key(&self) -> String {
        #[derive(Serialize)]
        struct KeyView<'a> {
            model_id: &'a str,
            messages: Vec<(&'static str, &'a str)>,
            temperature_bits: Option<u64>,
            max_tokens: Option<u32>,
            sample_index: u32,
        }
        let view = KeyView {
            model_id: &self.model_id,
            messages: self
                .messages
                .iter()
                .map(|m| (m.role.as_str(), m.content.as_str()))
                .collect(),
            temperature_bits: self.temperature.map(f64::to_bits),
            max_tokens: self.max_tokens,
            sample_index: self.sample_index,
        };
        let canonical = serde_json::to_vec(&view).expect("key serializes");
        crate::corpus::hex_string(&Sha256::digest(&canonical))
    }
}

/// A completion, annotated with cache provenance and the provider round-trip
/// count. `cached` means this call made zero provider round-trips; `attempts`
/// then reports what the original call took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub token_usage: (u64, u64),
    pub cached: bool,
    pub attempts: u32,
}

/// Retry policy for transient failures.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, backoff_base: Duration::from_secs(1) }
    }
}

/// The shared chat entry point. Safe for concurrent callers: the rate
/// limiter is the single synchronization point and the cache tolerates
/// concurrent readers with atomically renamed writes.
pub struct Gateway {
    provider: Box<dyn ChatProvider>,
    cache: Option<ResponseCache>,
    limiter: Option<RateLimiter>,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(provider: impl ChatProvider + 'static) -> Self {
        Gateway { provider: Box::new(provider), cache: None, limiter: None, retry: RetryPolicy::default() }
    }

    /// Enables the disk response cache rooted at `dir`.
    pub fn with_cache_dir(mut self, dir: impl Into<std::path::PathBuf>) -> Self {
        self.cache = Some(ResponseCache::new(dir.into()));
        self
    }

    /// Caps provider calls at `limit` per second.
    pub fn with_rate_limit(mut self, limit: usize) -> Self {
        self.limiter = Some(RateLimiter::new(limit, Box::new(SystemClock)));
        self
    }

    /// Rate limiting over an injected clock (tests).
    pub fn with_rate_limiter(mut self, limiter: RateLimiter) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Resolves a request: cache lookup, then provider round-trips with
    /// bounded retries and exponential backoff on transient failures.
    /// Successful fresh responses are persisted before returning.
    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let key = request.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                return Ok(ChatResponse {
                    text: hit.text,
                    token_usage: (hit.prompt_tokens, hit.completion_tokens),
                    cached: true,
                    attempts: hit.attempts,
                });
            }
        }
        let mut backoff = self.retry.backoff_base;
        let mut attempts = 0;
        loop {
            attempts += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            match self.provider.chat_once(request) {
                Ok(reply) => {
                    if let Some(cache) = &self.cache {
                        cache.put(
                            &key,
                            &CachedResponse {
                                text: reply.text.clone(),
                                prompt_tokens: reply.prompt_tokens,
                                completion_tokens: reply.completion_tokens,
                                attempts,
                            },
                        )?;
                    }
                    return Ok(ChatResponse {
                        text: reply.text,
                        token_usage: (reply.prompt_tokens, reply.completion_tokens),
                        cached: false,
                        attempts,
                    });
                }
                Err(GatewayError::Transient { message, .. }) => {
                    if attempts >= self.retry.max_attempts {
                        return Err(GatewayError::Transient { message, attempts });
                    }
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
                Err(other) => return Err(other),
            }
        }
    }
}

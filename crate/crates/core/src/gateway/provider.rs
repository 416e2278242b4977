//! Chat-completion providers: the provider trait and the HTTP client.

use std::time::Duration;

use serde::Deserialize;

use super::{ChatRequest, GatewayError};

/// A single provider round-trip's worth of output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderReply {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One chat-completion backend. Implementations perform exactly one
/// round-trip per call; caching, retries, and rate limiting live in the
/// [`Gateway`](super::Gateway).
pub trait ChatProvider: Send + Sync {
    fn chat_once(&self, request: &ChatRequest) -> Result<ProviderReply, GatewayError>;
}

/// OpenAI-compatible chat-completions client with bearer-token auth.
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl HttpProvider {
    /// `endpoint` is the full chat-completions URL. `api_key_env` names the
    /// environment variable holding the bearer token; unset means
    /// unauthenticated (local inference servers).
    pub fn new(endpoint: &str, api_key_env: Option<&str>) -> Self {
        let api_key = api_key_env.and_then(|var| std::env::var(var).ok());
        HttpProvider {
            endpoint: endpoint.to_string(),
            api_key,
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(180))
                .build()
                .expect("client builds"),
        }
    }
}

impl ChatProvider for HttpProvider {
    fn chat_once(&self, request: &ChatRequest) -> Result<ProviderReply, GatewayError> {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| serde_json::json!({ "role": m.role.as_str(), "content": m.content }))
            .collect();
        let mut body = serde_json::json!({
            "model": request.model_id,
            "messages": messages,
        });
        if let Some(t) = request.temperature {
            body["temperature"] = serde_json::json!(t);
        }
        if let Some(m) = request.max_tokens {
            body["max_tokens"] = serde_json::json!(m);
        }
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| GatewayError::Transient { message: format!("transport error: {e}"), attempts: 1 })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            let message = format!("status {status}: {text}");
            if status.as_u16() == 429 || status.is_server_error() {
                return Err(GatewayError::Transient { message, attempts: 1 });
            }
            return Err(GatewayError::Permanent { message });
        }
        let parsed: ChatCompletionResponse = resp
            .json()
            .map_err(|e| GatewayError::Permanent { message: format!("malformed response body: {e}") })?;
        let text = parsed
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| GatewayError::Permanent { message: "response held no completion text".into() })?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(ProviderReply {
            text,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        })
    }
}

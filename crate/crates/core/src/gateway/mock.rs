//! Scriptable in-process provider for deterministic offline runs.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;

use super::provider::{ChatProvider, ProviderReply};
use super::{ChatRequest, GatewayError};

type Rule = dyn Fn(&ChatRequest) -> String + Send + Sync;

enum Behavior {
    Script(Mutex<VecDeque<String>>),
    Rule(Box<Rule>),
}

struct MockInner {
    behavior: Behavior,
    requests: Mutex<Vec<ChatRequest>>,
}

/// A provider that replays a fixed script or applies a total rule to each
/// request, recording every request for later assertions. Clones share
/// state, so a test can keep one handle while the gateway owns another.
/// Performs no network activity.
#[derive(Clone)]
pub struct MockProvider {
    inner: Arc<MockInner>,
}

impl MockProvider {
    /// Replies with `responses` in order; a call past the end is an error.
    pub fn scripted<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        let script: VecDeque<String> = responses.into_iter().map(Into::into).collect();
        assert!(!script.is_empty(), "script must be non-empty");
        MockProvider {
            inner: Arc::new(MockInner {
                behavior: Behavior::Script(Mutex::new(script)),
                requests: Mutex::new(Vec::new()),
            }),
        }
    }

    /// Replies by applying `rule` to each request.
    pub fn with_rule(rule: impl Fn(&ChatRequest) -> String + Send + Sync + 'static) -> Self {
        MockProvider {
            inner: Arc::new(MockInner {
                behavior: Behavior::Rule(Box::new(rule)),
                requests: Mutex::new(Vec::new()),
            }),
        }
    }

    /// Every request recorded so far, in call order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.inner.requests.lock().expect("mock lock").clone()
    }

    pub fn request_count(&self) -> usize {
        self.inner.requests.lock().expect("mock lock").len()
    }
}

impl ChatProvider for MockProvider {
    fn chat_once(&self, request: &ChatRequest) -> Result<ProviderReply, GatewayError> {
        self.inner.requests.lock().expect("mock lock").push(request.clone());
        let text = match &self.inner.behavior {
            Behavior::Script(script) => script
                .lock()
                .expect("mock lock")
                .pop_front()
                .ok_or(GatewayError::ScriptExhausted)?,
            Behavior::Rule(rule) => rule(request),
        };
        let prompt_tokens: u64 = request
            .messages
            .iter()
            .map(|m| m.content.split_whitespace().count() as u64)
            .sum();
        let completion_tokens = text.split_whitespace().count() as u64;
        Ok(ProviderReply { text, prompt_tokens, completion_tokens })
    }
}

/// Scans a request's concatenated text for a labeled date line like
/// `Paper X Average Contextual Date: 2021-06-30`.
fn labeled_date(request: &ChatRequest, label: &str) -> Option<NaiveDate> {
    let marker = format!("Paper {label} Average Contextual Date:");
    for message in &request.messages {
        if let Some(pos) = message.content.find(&marker) {
            let rest = message.content[pos + marker.len()..].trim_start();
            let token: String = rest.chars().take_while(|c| !c.is_whitespace()).collect();
            let token = token.trim_end_matches(|c: char| !c.is_ascii_digit());
            if let Ok(date) = token.parse() {
                return Some(date);
            }
        }
    }
    None
}

/// The date-aware judge: answers with the slot whose average contextual
/// date is later, phrased as the closing-sentence verdict. Falls back to
/// slot X when the dates are missing or equal.
pub fn date_aware_judge() -> impl Fn(&ChatRequest) -> String + Send + Sync + 'static {
    |request: &ChatRequest| {
        let x = labeled_date(request, "X");
        let y = labeled_date(request, "Y");
        let winner = match (x, y) {
            (Some(dx), Some(dy)) if dy > dx => "Y",
            _ => "X",
        };
        format!("The more novel and impactful paper is Paper {winner}.")
    }
}

/// A judge biased to the first presentation slot regardless of content.
pub fn always_first_slot() -> impl Fn(&ChatRequest) -> String + Send + Sync + 'static {
    |_: &ChatRequest| "The more novel and impactful paper is Paper X.".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    fn request(content: &str) -> ChatRequest {
        ChatRequest::new("mock-model", vec![ChatMessage::user(content)])
    }

    #[test]
    fn script_replays_in_order_then_errors() {
        let mock = MockProvider::scripted(["1", "2"]);
        assert_eq!(mock.chat_once(&request("a")).unwrap().text, "1");
        assert_eq!(mock.chat_once(&request("b")).unwrap().text, "2");
        assert!(matches!(
            mock.chat_once(&request("c")),
            Err(GatewayError::ScriptExhausted)
        ));
        assert_eq!(mock.request_count(), 3);
    }

    #[test]
    fn rule_provider_records_requests() {
        let mock = MockProvider::with_rule(|req| format!("echo: {}", req.messages[0].content));
        let reply = mock.chat_once(&request("hello")).unwrap();
        assert_eq!(reply.text, "echo: hello");
        assert_eq!(mock.requests()[0].messages[0].content, "hello");
    }

    #[test]
    fn date_aware_judge_picks_the_later_slot() {
        let judge = date_aware_judge();
        let prompt = "Paper X Average Contextual Date: 2021-01-01\n\
                      Paper Y Average Contextual Date: 2015-06-01\n";
        assert_eq!(
            judge(&request(prompt)),
            "The more novel and impactful paper is Paper X."
        );
        let flipped = "Paper X Average Contextual Date: 2015-06-01\n\
                       Paper Y Average Contextual Date: 2021-01-01\n";
        assert_eq!(
            judge(&request(flipped)),
            "The more novel and impactful paper is Paper Y."
        );
    }

    #[test]
    fn always_first_slot_ignores_content() {
        let rule = always_first_slot();
        assert_eq!(
            rule(&request("anything")),
            "The more novel and impactful paper is Paper X."
        );
    }
}

//! Chat-completion providers: a scripted stub for tests and an
//! OpenAI-compatible HTTP client.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        Self { input_tokens, output_tokens }
    }

    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        self.input_tokens += rhs.input_tokens;
        self.output_tokens += rhs.output_tokens;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    /// Command feedback; sent to the provider as a user message.
    Observation,
}

impl Role {
    pub fn wire_name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User | Role::Observation => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl Default for Decoding {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("scripted provider has no replies left")]
    ScriptExhausted,
    #[error("missing credentials: environment variable {0} is not set")]
    MissingCredentials(String),
    #[error("invalid transcript fixture: {0}")]
    Fixture(String),
}

pub trait ChatProvider {
    fn model_id(&self) -> &str;
    fn complete(&mut self, messages: &[ChatMessage], decoding: &Decoding) -> Result<Completion, ProviderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn immediate() -> Self {
        Self { attempts: 3, base_delay: Duration::ZERO }
    }
}

/// Query with bounded exponential backoff; the last error is returned once
/// all attempts fail.
pub fn query_provider(
    provider: &mut dyn ChatProvider,
    messages: &[ChatMessage],
    decoding: &Decoding,
    retry: &RetryPolicy,
) -> Result<Completion, ProviderError> {
    let mut last = None;
    for attempt in 0..retry.attempts.max(1) {
        if attempt > 0 && !retry.base_delay.is_zero() {
            std::thread::sleep(retry.base_delay * 2u32.pow(attempt - 1));
        }
        match provider.complete(messages, decoding) {
            Ok(c) => return Ok(c),
            Err(e @ ProviderError::MissingCredentials(_)) => return Err(e),
            Err(e) => {
                tracing::warn!(attempt = attempt + 1, error = %e, "provider query failed");
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Text {
        text: String,
        #[serde(default)]
        usage: TokenUsage,
    },
    Failure {
        error: String,
    },
}

impl ScriptedReply {
    pub fn text(text: impl Into<String>, usage: TokenUsage) -> Self {
        Self::Text { text: text.into(), usage }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnExhausted {
    /// Keep answering with the last scripted reply.
    RepeatLast,
    #[default]
    Error,
}

/// On-disk transcript fixture for the scripted provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptFixture {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub on_exhausted: OnExhausted,
    pub replies: Vec<ScriptedReply>,
}

fn default_model() -> String {
    "scripted".into()
}

/// Replays queued replies in order; records every request it receives.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    model: String,
    queue: VecDeque<ScriptedReply>,
    last: Option<ScriptedReply>,
    on_exhausted: OnExhausted,
    pub requests: Vec<Vec<ChatMessage>>,
}

impl ScriptedProvider {
    pub fn new(fixture: ScriptFixture) -> Self {
        Self {
            model: fixture.model,
            queue: fixture.replies.into(),
            last: None,
            on_exhausted: fixture.on_exhausted,
            requests: Vec::new(),
        }
    }

    pub fn from_replies(replies: Vec<ScriptedReply>, on_exhausted: OnExhausted) -> Self {
        Self::new(ScriptFixture { model: default_model(), on_exhausted, replies })
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        let fixture: ScriptFixture =
            serde_json::from_str(&text).map_err(|e| ProviderError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(Self::new(fixture))
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl ChatProvider for ScriptedProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&mut self, messages: &[ChatMessage], _decoding: &Decoding) -> Result<Completion, ProviderError> {
        self.requests.push(messages.to_vec());
        let reply = match self.queue.pop_front() {
            Some(r) => {
                self.last = Some(r.clone());
                r
            }
            None => match (self.on_exhausted, &self.last) {
                (OnExhausted::RepeatLast, Some(r)) => r.clone(),
                _ => return Err(ProviderError::ScriptExhausted),
            },
        };
        match reply {
            ScriptedReply::Text { text, usage } => Ok(Completion { text, usage }),
            ScriptedReply::Failure { error } => Err(ProviderError::Transport(error)),
        }
    }
}

/// Client for OpenAI-compatible `/chat/completions` endpoints.
pub struct OpenAiCompatProvider {
    endpoint: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl OpenAiCompatProvider {
    pub fn new(endpoint: &str, model: &str, api_key: String, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(Self { endpoint: endpoint.trim_end_matches('/').to_string(), model: model.to_string(), api_key, client })
    }

    /// Read the API key from `key_env`; the key is held only in memory.
    pub fn from_env(endpoint: &str, model: &str, key_env: &str, timeout: Duration) -> Result<Self, ProviderError> {
        let key = std::env::var(key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ProviderError::MissingCredentials(key_env.to_string()))?;
        Self::new(endpoint, model, key, timeout)
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl ChatProvider for OpenAiCompatProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&mut self, messages: &[ChatMessage], decoding: &Decoding) -> Result<Completion, ProviderError> {
        let wire: Vec<serde_json::Value> = messages
            .iter()
            .map(|m| serde_json::json!({ "role": m.role.wire_name(), "content": m.content }))
            .collect();
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": wire,
            "temperature": decoding.temperature,
        });
        if let Some(max) = decoding.max_tokens {
            body["max_tokens"] = max.into();
        }
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Http { status: status.as_u16(), body: text.chars().take(500).collect() });
        }
        let parsed: WireResponse = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let usage = parsed.usage.ok_or_else(|| ProviderError::Malformed("response has no usage".into()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::Malformed("response has no message content".into()))?;
        Ok(Completion { text: content, usage: TokenUsage::new(usage.prompt_tokens, usage.completion_tokens) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg() -> Vec<ChatMessage> {
        vec![ChatMessage { role: Role::User, content: "hi".into() }]
    }

    #[test]
    fn scripted_replies_in_order_with_declared_usage() {
        let mut p = ScriptedProvider::from_replies(
            vec![ScriptedReply::text("a", TokenUsage::new(1200, 340)), ScriptedReply::text("b", TokenUsage::default())],
            OnExhausted::Error,
        );
        let d = Decoding::default();
        let first = p.complete(&msg(), &d).unwrap();
        assert_eq!((first.text.as_str(), first.usage), ("a", TokenUsage::new(1200, 340)));
        assert_eq!(p.complete(&msg(), &d).unwrap().text, "b");
        assert_eq!(p.complete(&msg(), &d), Err(ProviderError::ScriptExhausted));
    }

    #[test]
    fn repeat_last_when_exhausted() {
        let mut p = ScriptedProvider::from_replies(vec![ScriptedReply::text("x", TokenUsage::default())], OnExhausted::RepeatLast);
        for _ in 0..5 {
            assert_eq!(p.complete(&msg(), &Decoding::default()).unwrap().text, "x");
        }
    }

    #[test]
    fn retry_gives_up_after_three_failures() {
        let fail = || ScriptedReply::Failure { error: "reset".into() };
        let mut p = ScriptedProvider::from_replies(
            vec![fail(), fail(), fail(), ScriptedReply::text("late", TokenUsage::default())],
            OnExhausted::Error,
        );
        let err = query_provider(&mut p, &msg(), &Decoding::default(), &RetryPolicy::immediate()).unwrap_err();
        assert_eq!(err, ProviderError::Transport("reset".into()));
        assert_eq!(p.requests.len(), 3);

        let mut p = ScriptedProvider::from_replies(
            vec![fail(), fail(), ScriptedReply::text("ok", TokenUsage::default())],
            OnExhausted::Error,
        );
        assert_eq!(query_provider(&mut p, &msg(), &Decoding::default(), &RetryPolicy::immediate()).unwrap().text, "ok");
    }

    #[test]
    fn fixture_json_shape() {
        let fx: ScriptFixture = serde_json::from_str(
            r#"{"on_exhausted":"repeat_last","replies":[{"text":"t","usage":{"input_tokens":3,"output_tokens":4}},{"error":"boom"}]}"#,
        )
        .unwrap();
        assert_eq!(fx.model, "scripted");
        assert_eq!(fx.replies[1], ScriptedReply::Failure { error: "boom".into() });
    }

    #[test]
    fn missing_key_is_reported_by_name() {
        let err = OpenAiCompatProvider::from_env("http://localhost:1", "m", "HISTREPAIR_TEST_UNSET_KEY", Duration::from_secs(1))
            .err()
            .unwrap();
        assert_eq!(err, ProviderError::MissingCredentials("HISTREPAIR_TEST_UNSET_KEY".into()));
    }
}

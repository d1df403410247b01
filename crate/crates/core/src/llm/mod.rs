//! Chat-model abstraction: conversations, token accounting, prompts, code
//! extraction, and the HTTP and scripted backends.

mod http;
mod prompts;
mod scripted;

pub use http::{HttpChatBackend, RateLimiter};
pub use prompts::{
    build_feedback_prompt, build_translation_prompt, extract_code, parse_counterexample, render_counterexample,
    render_diagnostics, CodeConfidence, FeedbackItem, ParsedCounterexample, DEFAULT_DIAGNOSTIC_CAP, FEEDBACK_PREFIX,
    TRANSLATION_PREFIX,
};
pub use scripted::{ScriptEntry, ScriptedBackend, ScriptedError};

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed conversation: {0}")]
    Conversation(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by backend: {0}")]
    RateLimited(String),
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("request rejected by content filter: {0}")]
    ContentFiltered(String),
    #[error("quota exhausted: {0}")]
    Quota(String),
    #[error("request failed with status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    Schema(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("script error: {0}")]
    Script(String),
    #[error("empty response")]
    EmptyResponse,
}

impl LlmError {
    /// Only transport-level problems are retried.
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::RateLimited(_) | LlmError::Server { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

/// An ordered dialogue. The caller owns it; backends never modify it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub messages: Vec<ChatMessage>,
}

impl Conversation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, role: Role, content: impl Into<String>) {
        self.messages.push(ChatMessage::new(role, content));
    }

    pub fn last_user(&self) -> Option<&str> {
        self.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str())
    }

    /// Checks ordering and content rules, requiring a trailing user turn.
    pub fn validate(&self) -> Result<(), LlmError> {
        let mut expect = Role::User;
        let mut seen_non_system = false;
        for (i, m) in self.messages.iter().enumerate() {
            if m.role == Role::System {
                if seen_non_system {
                    return Err(LlmError::Conversation(format!("system message at position {i} after dialogue start")));
                }
                continue;
            }
            seen_non_system = true;
            if m.role != expect {
                return Err(LlmError::Conversation(format!("expected {expect:?} turn at position {i}, found {:?}", m.role)));
            }
            if m.content.trim().is_empty() {
                return Err(LlmError::Conversation(format!("empty {:?} message at position {i}", m.role)));
            }
            expect = if expect == Role::User { Role::Assistant } else { Role::User };
        }
        if expect != Role::Assistant {
            return Err(LlmError::Conversation("conversation must end with a user turn".into()));
        }
        Ok(())
    }
}

/// Token counts of one or more calls. `completion_tokens` excludes reasoning
/// tokens, which are tracked separately when the backend reports them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_tokens: Option<u64>,
}

impl TokenUsage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64, reasoning_tokens: Option<u64>) -> Self {
        TokenUsage { prompt_tokens, completion_tokens, reasoning_tokens }
    }

    /// Tokens produced by the model, reasoning included.
    pub fn generated(&self) -> u64 {
        self.completion_tokens + self.reasoning_tokens.unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.generated()
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;
    fn add(self, o: TokenUsage) -> TokenUsage {
        let reasoning = match (self.reasoning_tokens, o.reasoning_tokens) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0) + b.unwrap_or(0)),
        };
        TokenUsage {
            prompt_tokens: self.prompt_tokens + o.prompt_tokens,
            completion_tokens: self.completion_tokens + o.completion_tokens,
            reasoning_tokens: reasoning,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, o: TokenUsage) {
        *self = *self + o;
    }
}

impl std::iter::Sum for TokenUsage {
    fn sum<I: Iterator<Item = TokenUsage>>(iter: I) -> Self {
        iter.fold(TokenUsage::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

/// A chat-completion backend. Implementations are shared across workers.
pub trait ChatBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, conversation: &Conversation) -> Result<Completion, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    HttpChat,
    ScriptedMock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 4, initial_backoff_ms: 500, max_backoff_ms: 16_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based).
    pub fn backoff(&self, attempt: u32) -> std::time::Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64 << attempt.min(20)).min(self.max_backoff_ms);
        std::time::Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model_id: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub script: Option<PathBuf>,
    #[serde(default)]
    pub requests_per_minute: Option<f64>,
}

fn default_temperature() -> f64 {
    0.7
}

fn default_timeout() -> u64 {
    300
}

impl BackendConfig {
    pub fn scripted(model_id: impl Into<String>, script: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::ScriptedMock,
            model_id: model_id.into(),
            temperature: default_temperature(),
            endpoint: None,
            request_timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
            credential_env: None,
            script: Some(script.into()),
            requests_per_minute: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0) {
            return Err(LlmError::Precondition(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.model_id.trim().is_empty() {
            return Err(LlmError::Precondition("model id is empty".into()));
        }
        match self.kind {
            BackendKind::HttpChat if self.endpoint.is_none() => {
                Err(LlmError::Precondition(format!("model {}: http-chat backend needs an endpoint", self.model_id)))
            }
            BackendKind::ScriptedMock if self.script.is_none() => {
                Err(LlmError::Precondition(format!("model {}: scripted-mock backend needs a script", self.model_id)))
            }
            _ => Ok(()),
        }
    }
}

pub fn build_backend(config: &BackendConfig) -> Result<Arc<dyn ChatBackend>, LlmError> {
    config.validate()?;
    Ok(match config.kind {
        BackendKind::HttpChat => Arc::new(HttpChatBackend::new(config.clone())?),
        BackendKind::ScriptedMock => {
            let path = config.script.as_ref().expect("validated");
            Arc::new(ScriptedBackend::from_file(&config.model_id, path)?)
        }
    })
}

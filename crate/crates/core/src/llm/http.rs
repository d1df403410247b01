//! Chat-completion client for OpenAI-compatible HTTP endpoints.

use super::{BackendConfig, ChatBackend, Completion, Conversation, LlmError, TokenUsage};
use serde_json::{json, Value};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Token bucket that admits at most `rate` requests per second on average,
/// with bursts up to `capacity`.
#[derive(Debug)]
pub struct RateLimiter {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(requests: f64) -> Self {
        let rate = requests / 60.0;
        let capacity = requests.clamp(1.0, 10.0);
        RateLimiter { rate, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
                let now = Instant::now();
                let (tokens, last) = *st;
                let refilled = (tokens + now.duration_since(last).as_secs_f64() * self.rate).min(self.capacity);
                if refilled >= 1.0 {
                    *st = (refilled - 1.0, now);
                    return;
                }
                *st = (refilled, now);
                Duration::from_secs_f64((1.0 - refilled) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}

pub struct HttpChatBackend {
    config: BackendConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    limiter: Option<RateLimiter>,
}

impl HttpChatBackend {
    pub fn new(config: BackendConfig) -> Result<Self, LlmError> {
        let api_key = match &config.credential_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingCredential(var.clone()))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let limiter = config.requests_per_minute.map(RateLimiter::per_minute);
        Ok(HttpChatBackend { config, client, api_key, limiter })
    }

    fn request_body(&self, conversation: &Conversation) -> Value {
        json!({
            "model": self.config.model_id,
            "temperature": self.config.temperature,
            "messages": conversation.messages,
        })
    }

    fn send_once(&self, body: &Value) -> Result<Completion, LlmError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let url = self.config.endpoint.as_deref().expect("validated endpoint");
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if status == 200 {
            return parse_reply(&text);
        }
        Err(classify_status(status, text))
    }
}

fn classify_status(status: u16, body: String) -> LlmError {
    let lower = body.to_lowercase();
    if lower.contains("content_filter") || lower.contains("content management policy") {
        LlmError::ContentFiltered(body)
    } else if lower.contains("insufficient_quota") {
        LlmError::Quota(body)
    } else if status == 429 {
        LlmError::RateLimited(body)
    } else if status >= 500 {
        LlmError::Server { status, body }
    } else {
        LlmError::Http { status, body }
    }
}

/// Parses a chat-completion reply body.
pub(crate) fn parse_reply(text: &str) -> Result<Completion, LlmError> {
    let v: Value = serde_json::from_str(text).map_err(|e| LlmError::Schema(format!("reply is not JSON: {e}")))?;
    let choice = v.pointer("/choices/0").ok_or_else(|| LlmError::Schema("reply has no choices".into()))?;
    if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
        return Err(LlmError::ContentFiltered("finish_reason=content_filter".into()));
    }
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Schema("reply has no message content".into()))?;
    let num = |p: &str| v.pointer(p).and_then(Value::as_u64);
    let reasoning = num("/usage/completion_tokens_details/reasoning_tokens");
    // completion_tokens includes reasoning tokens on the wire; store them apart
    let completion = num("/usage/completion_tokens").unwrap_or(0).saturating_sub(reasoning.unwrap_or(0));
    let usage = TokenUsage::new(num("/usage/prompt_tokens").unwrap_or(0), completion, reasoning);
    Ok(Completion { text: content.to_string(), usage })
}

impl ChatBackend for HttpChatBackend {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn complete(&self, conversation: &Conversation) -> Result<Completion, LlmError> {
        conversation.validate()?;
        let body = self.request_body(conversation);
        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Err(e) if e.is_retryable() && attempt < self.config.retry.max_retries => {
                    log::warn!("{}: {e}; retrying", self.config.model_id);
                    std::thread::sleep(self.config.retry.backoff(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{BackendKind, RetryPolicy, Role};
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves canned (status, body) replies, one per connection, and returns captured request bodies.
    fn serve(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let h = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut s = stream;
                write!(
                    s,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (addr, h)
    }

    fn config(endpoint: String) -> BackendConfig {
        BackendConfig {
            kind: BackendKind::HttpChat,
            model_id: "test-model".into(),
            temperature: 0.7,
            endpoint: Some(endpoint),
            request_timeout_secs: 10,
            retry: RetryPolicy { max_retries: 2, initial_backoff_ms: 1, max_backoff_ms: 2 },
            credential_env: None,
            script: None,
            requests_per_minute: None,
        }
    }

    fn conv() -> Conversation {
        let mut c = Conversation::new();
        c.push(Role::User, "hello");
        c
    }

    const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"hi"},"finish_reason":"stop"}],
        "usage":{"prompt_tokens":5,"completion_tokens":9,"completion_tokens_details":{"reasoning_tokens":4}}}"#;

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, h) = serve(vec![(503, "{}".into()), (200, OK.into())]);
        let b = HttpChatBackend::new(config(url)).unwrap();
        let c = b.complete(&conv()).unwrap();
        assert_eq!(c.text, "hi");
        assert_eq!(c.usage, TokenUsage::new(5, 5, Some(4)));
        let bodies = h.join().unwrap();
        let sent: Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["temperature"], 0.7);
        assert_eq!(sent["messages"][0]["role"], "user");
    }

    #[test]
    fn content_filter_is_not_retried() {
        let (url, h) = serve(vec![(
            400,
            r#"{"error":{"code":"content_filter","message":"filtered due to the content management policy"}}"#.into(),
        )]);
        let b = HttpChatBackend::new(config(url)).unwrap();
        assert!(matches!(b.complete(&conv()), Err(LlmError::ContentFiltered(_))));
        assert_eq!(h.join().unwrap().len(), 1);
    }

    #[test]
    fn reply_parsing() {
        assert!(matches!(parse_reply("{}"), Err(LlmError::Schema(_))));
        let filtered = r#"{"choices":[{"message":{"content":""},"finish_reason":"content_filter"}]}"#;
        assert!(matches!(parse_reply(filtered), Err(LlmError::ContentFiltered(_))));
        assert!(matches!(classify_status(429, "insufficient_quota".into()), LlmError::Quota(_)));
        assert!(classify_status(429, "slow down".into()).is_retryable());
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let l = RateLimiter { rate: 50.0, capacity: 1.0, state: Mutex::new((1.0, Instant::now())) };
        let t = Instant::now();
        for _ in 0..3 {
            l.acquire();
        }
        assert!(t.elapsed() >= Duration::from_millis(35));
    }
}

//! Deterministic scripted backend for tests and demos.
//!
//! Entries with a `match` substring are selected statelessly by the last user
//! message and are safe under concurrent use. Entries without `match` are
//! consumed in order, one per call; that mode assumes a single caller.

use super::{ChatBackend, Completion, Conversation, LlmError, TokenUsage};
use crate::corpus::{DefaultTokenizer, Tokenizer};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedError {
    ContentFilter,
    Quota,
    Transport,
    Schema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub matches: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ScriptedError>,
}

impl ScriptEntry {
    pub fn reply(text: impl Into<String>) -> Self {
        ScriptEntry { matches: None, response: Some(text.into()), usage: None, error: None }
    }

    pub fn when(pattern: impl Into<String>, text: impl Into<String>) -> Self {
        ScriptEntry { matches: Some(pattern.into()), ..Self::reply(text) }
    }

    pub fn with_usage(mut self, usage: TokenUsage) -> Self {
        self.usage = Some(usage);
        self
    }

    pub fn failing(error: ScriptedError) -> Self {
        ScriptEntry { matches: None, response: None, usage: None, error: Some(error) }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    List(Vec<ScriptEntry>),
    Object { entries: Vec<ScriptEntry> },
}

#[derive(Debug)]
pub struct ScriptedBackend {
    model_id: String,
    keyed: Vec<ScriptEntry>,
    sequential: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(model_id: impl Into<String>, entries: Vec<ScriptEntry>) -> Self {
        let (keyed, sequential) = entries.into_iter().partition(|e| e.matches.is_some());
        ScriptedBackend { model_id: model_id.into(), keyed, sequential, cursor: Mutex::new(0) }
    }

    pub fn from_json(model_id: impl Into<String>, json: &str) -> Result<Self, LlmError> {
        let file: ScriptFile = serde_json::from_str(json).map_err(|e| LlmError::Script(format!("invalid script: {e}")))?;
        let entries = match file {
            ScriptFile::List(v) | ScriptFile::Object { entries: v } => v,
        };
        Ok(Self::new(model_id, entries))
    }

    pub fn from_file(model_id: impl Into<String>, path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(model_id, &text)
    }

    /// Number of sequential entries consumed so far.
    pub fn calls_consumed(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn answer(&self, entry: &ScriptEntry, conversation: &Conversation) -> Result<Completion, LlmError> {
        if let Some(err) = entry.error {
            return Err(match err {
                ScriptedError::ContentFilter => {
                    LlmError::ContentFiltered("the response was filtered due to the content management policy".into())
                }
                ScriptedError::Quota => LlmError::Quota("insufficient_quota".into()),
                ScriptedError::Transport => LlmError::Transport("scripted connection reset".into()),
                ScriptedError::Schema => LlmError::Schema("scripted malformed reply".into()),
            });
        }
        let text = entry.response.clone().ok_or_else(|| LlmError::Script("entry has neither response nor error".into()))?;
        let usage = match entry.usage {
            Some(u) => u,
            None => estimate_usage(conversation, &text),
        };
        Ok(Completion { text, usage })
    }
}

/// Usage estimate with the default tokenizer, for scripts without usage tables.
pub fn estimate_usage(conversation: &Conversation, response: &str) -> TokenUsage {
    let count = |s: &str| DefaultTokenizer.count(s).unwrap_or(0) as u64;
    let prompt = conversation.messages.iter().map(|m| count(&m.content)).sum();
    TokenUsage::new(prompt, count(response), None)
}

impl ChatBackend for ScriptedBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, conversation: &Conversation) -> Result<Completion, LlmError> {
        conversation.validate()?;
        let last = conversation.last_user().unwrap_or("");
        if let Some(e) = self.keyed.iter().find(|e| e.matches.as_deref().is_some_and(|m| last.contains(m))) {
            return self.answer(e, conversation);
        }
        let entry = {
            let mut cur = self.cursor.lock().unwrap_or_else(|p| p.into_inner());
            let e = self.sequential.get(*cur).cloned();
            if e.is_some() {
                *cur += 1;
            }
            e
        };
        match entry {
            Some(e) => self.answer(&e, conversation),
            None => Err(LlmError::Script(format!(
                "script for {} exhausted after {} sequential entries and no match entry applies",
                self.model_id,
                self.sequential.len()
            ))),
        }
    }
}

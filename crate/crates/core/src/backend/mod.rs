//! Completion backends.
//!
//! [`LlmBackend`] is the single seam between the agent and a model. Two
//! implementations ship: [`HttpBackend`] for OpenAI-compatible chat endpoints
//! and [`ScriptedBackend`], a deterministic rule table for offline runs.
//! [`Completer`] wraps a backend for one caller, counting logical calls per
//! tag and truncating responses to the request's token budget.

mod http;
mod scripted;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::tokenizer::Tokenizer;

pub use http::{HttpBackend, HttpConfig, ENV_API_BASE, ENV_API_KEY, ENV_MODEL};
pub use scripted::{RuleMatch, ScriptedBackend, ScriptedRule};

/// Which agent step issued a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallTag {
    Read,
    Answer,
    Decompose,
    Integrate,
}

impl CallTag {
    pub const ALL: [CallTag; 4] = [CallTag::Read, CallTag::Answer, CallTag::Decompose, CallTag::Integrate];

    pub fn as_str(self) -> &'static str {
        match self {
            CallTag::Read => "read",
            CallTag::Answer => "answer",
            CallTag::Decompose => "decompose",
            CallTag::Integrate => "integrate",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CallTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CallTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CallTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown call tag `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    pub tag: CallTag,
}

impl CompletionRequest {
    pub fn new(tag: CallTag, prompt: String, max_tokens: usize, temperature: f64) -> Self {
        Self {
            prompt,
            max_tokens,
            temperature,
            tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("script exhausted: no rule matches {tag} request starting with {prompt_prefix:?}")]
    ScriptExhausted { tag: CallTag, prompt_prefix: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_config(&self) -> bool {
        matches!(self, BackendError::Config(_))
    }
}

/// A text-completion model.
///
/// Implementations must be shareable across threads; any per-request state
/// lives on the stack of `generate`.
pub trait LlmBackend: Send + Sync {
    fn generate(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn generate(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).generate(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn generate(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).generate(request)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn generate(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).generate(request)
    }
}

/// Backend backed by a closure. Handy for programmatic scripts in tests.
pub struct FnBackend<F>(pub F);

impl<F> LlmBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn generate(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (self.0)(request)
    }
}

/// Logical call counts per [`CallTag`].
#[derive(Debug, Default)]
pub struct CallCounter {
    by_tag: [AtomicU64; 4],
}

impl CallCounter {
    pub fn record(&self, tag: CallTag) {
        self.by_tag[tag.slot()].fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self, tag: CallTag) -> u64 {
        self.by_tag[tag.slot()].load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        CallTag::ALL.iter().map(|t| self.get(*t)).sum()
    }
}

/// Per-caller view of a backend: counts every logical call and truncates
/// responses to `max_tokens` under `tokenizer`.
pub struct Completer<'a> {
    backend: &'a dyn LlmBackend,
    tokenizer: Tokenizer,
    counter: CallCounter,
}

impl<'a> Completer<'a> {
    pub fn new(backend: &'a dyn LlmBackend, tokenizer: Tokenizer) -> Self {
        Self {
            backend,
            tokenizer,
            counter: CallCounter::default(),
        }
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        if request.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        self.counter.record(request.tag);
        let text = self.backend.generate(request)?;
        Ok(self.tokenizer.truncate(&text, request.max_tokens).to_string())
    }

    pub fn counter(&self) -> &CallCounter {
        &self.counter
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer
    }
}

/// Backend selection as it appears in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Http(HttpConfig),
    Scripted {
        script: PathBuf,
    },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Http(HttpConfig::default())
    }
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn LlmBackend>, BackendError> {
        match self {
            BackendConfig::Http(cfg) => Ok(Box::new(HttpBackend::new(cfg.resolved()?)?)),
            BackendConfig::Scripted { script } => Ok(Box::new(ScriptedBackend::from_file(script)?)),
        }
    }
}

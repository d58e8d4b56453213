use std::env;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, CompletionRequest, LlmBackend};

pub const ENV_API_BASE: &str = "MEMREREAD_API_BASE";
pub const ENV_API_KEY: &str = "MEMREREAD_API_KEY";
pub const ENV_MODEL: &str = "MEMREREAD_MODEL";

/// OpenAI-compatible endpoint settings. Unset fields fall back to the
/// `MEMREREAD_*` environment variables when resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub api_base: Option<String>,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            api_base: None,
            api_key: None,
            model: None,
            max_retries: 3,
            backoff_ms: 500,
            timeout_secs: 300,
        }
    }
}

impl HttpConfig {
    /// Fills unset endpoint fields from the environment. `api_base` and
    /// `model` are required afterwards; `api_key` stays optional.
    pub fn resolved(&self) -> Result<HttpConfig, BackendError> {
        let pick = |v: &Option<String>, var: &str| v.clone().or_else(|| env::var(var).ok().filter(|s| !s.is_empty()));
        let out = HttpConfig {
            api_base: pick(&self.api_base, ENV_API_BASE),
            api_key: pick(&self.api_key, ENV_API_KEY),
            model: pick(&self.model, ENV_MODEL),
            ..self.clone()
        };
        if out.api_base.is_none() {
            return Err(BackendError::Config(format!("no API base URL (set {ENV_API_BASE})")));
        }
        if out.model.is_none() {
            return Err(BackendError::Config(format!("no model name (set {ENV_MODEL})")));
        }
        Ok(out)
    }
}

/// Chat-completions client with bounded exponential-backoff retries.
#[derive(Debug)]
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    model: String,
    max_retries: u32,
    backoff: Duration,
    attempts: AtomicU64,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let base = config
            .api_base
            .ok_or_else(|| BackendError::Config("api_base is required".into()))?;
        let model = config
            .model
            .ok_or_else(|| BackendError::Config("model is required".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| BackendError::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            client,
            url: chat_completions_url(&base),
            api_key: config.api_key,
            model,
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.backoff_ms),
            attempts: AtomicU64::new(0),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Total HTTP attempts so far, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &Value) -> Result<String, (bool, String)> {
        self.attempts.fetch_add(1, Ordering::Relaxed);
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| (true, e.to_string()))?;
        if !status.is_success() {
            let retryable = status.is_server_error() || status.as_u16() == 429 || status.as_u16() == 408;
            return Err((retryable, format!("HTTP {status}: {}", truncate_for_error(&text))));
        }
        extract_content(&text).ok_or_else(|| (false, format!("malformed response: {}", truncate_for_error(&text))))
    }
}

impl LlmBackend for HttpBackend {
    fn generate(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        });
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retryable, message)) => {
                    if !retryable || attempts > self.max_retries {
                        return Err(BackendError::Transport { attempts, message });
                    }
                    let delay = self.backoff.saturating_mul(1 << (attempts - 1).min(16));
                    log::warn!("request to {} failed (attempt {attempts}): {message}; retrying in {delay:?}", self.url);
                    thread::sleep(delay);
                }
            }
        }
    }
}

fn chat_completions_url(base: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

fn truncate_for_error(s: &str) -> String {
    s.chars().take(200).collect()
}

use std::fs;
use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{BackendError, CallTag, CompletionRequest, LlmBackend};

const PROMPT_PREFIX_CHARS: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMatch {
    TagEquals(CallTag),
    PromptContains(String),
    PromptRegex(String),
}

/// One entry of a script file.
///
/// ```json
/// {"match": {"tag_equals": "read"}, "response": "MEM-A", "consume_once": false}
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedRule {
    #[serde(rename = "match")]
    pub matcher: RuleMatch,
    pub response: String,
    #[serde(default)]
    pub consume_once: bool,
}

impl ScriptedRule {
    pub fn new(matcher: RuleMatch, response: impl Into<String>) -> Self {
        Self {
            matcher,
            response: response.into(),
            consume_once: false,
        }
    }

    pub fn once(mut self) -> Self {
        self.consume_once = true;
        self
    }
}

enum CompiledMatch {
    Tag(CallTag),
    Contains(String),
    Regex(Regex),
}

impl CompiledMatch {
    fn matches(&self, request: &CompletionRequest) -> bool {
        match self {
            CompiledMatch::Tag(tag) => request.tag == *tag,
            CompiledMatch::Contains(needle) => request.prompt.contains(needle.as_str()),
            CompiledMatch::Regex(re) => re.is_match(&request.prompt),
        }
    }
}

/// Deterministic rule-table backend. The first matching rule that has not
/// been consumed answers; a request no rule matches is an error.
pub struct ScriptedBackend {
    rules: Vec<(CompiledMatch, String, bool)>,
    consumed: Mutex<Vec<bool>>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>) -> Result<Self, BackendError> {
        let compiled = rules
            .into_iter()
            .map(|rule| {
                let m = match rule.matcher {
                    RuleMatch::TagEquals(tag) => CompiledMatch::Tag(tag),
                    RuleMatch::PromptContains(s) => CompiledMatch::Contains(s),
                    RuleMatch::PromptRegex(pattern) => CompiledMatch::Regex(
                        Regex::new(&pattern)
                            .map_err(|e| BackendError::Config(format!("bad prompt_regex {pattern:?}: {e}")))?,
                    ),
                };
                Ok((m, rule.response, rule.consume_once))
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        let consumed = Mutex::new(vec![false; compiled.len()]);
        Ok(Self {
            rules: compiled,
            consumed,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, BackendError> {
        let rules: Vec<ScriptedRule> =
            serde_json::from_str(json).map_err(|e| BackendError::Config(format!("bad script: {e}")))?;
        Self::new(rules)
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl LlmBackend for ScriptedBackend {
    fn generate(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let mut consumed = self.consumed.lock().unwrap_or_else(|e| e.into_inner());
        for (i, (matcher, response, once)) in self.rules.iter().enumerate() {
            if consumed[i] || !matcher.matches(request) {
                continue;
            }
            if *once {
                consumed[i] = true;
            }
            return Ok(response.clone());
        }
        Err(BackendError::ScriptExhausted {
            tag: request.tag,
            prompt_prefix: request.prompt.chars().take(PROMPT_PREFIX_CHARS).collect(),
        })
    }
}

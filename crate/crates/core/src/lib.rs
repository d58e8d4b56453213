//! Long-context question answering with a bounded streaming memory and
//! adaptive rereading.
//!
//! * [`agent`] runs the read, decompose, reread, integrate and answer loop
//!   against any [`LlmBackend`].
//! * [`advantage`] computes rereading-adaptive group advantages from logged
//!   rollouts.
//! * [`globalreasoning`] generates the synthetic Global Reasoning benchmark
//!   and solves it with a text-scanning oracle.
//! * [`eval`] runs the agent over task files and aggregates metrics.

pub mod advantage;
pub mod agent;
pub mod backend;
pub mod eval;
pub mod globalreasoning;
pub mod jsonl;
pub mod prompt;
pub mod tokenizer;
pub mod types;

pub use advantage::{
    normalize_answer, outcome_advantages, outcome_reward, overall_advantages, recall_score, state_advantages,
    state_rewards, AdvantageError, AdvantageTable, Matcher,
};
pub use agent::{run, Agent, AgentError, RunFailure, RunStats};
pub use eval::{evaluate, EvalOptions, EvalReport};
pub use backend::{
    BackendConfig, BackendError, CallTag, CompletionRequest, FnBackend, HttpBackend, HttpConfig, LlmBackend,
    ScriptedBackend, ScriptedRule,
};
pub use prompt::{parse_boxed_answer, parse_query, strip_confirmed_tags, PromptKind, PromptSet};
pub use tokenizer::{chunk_document, count_tokens, Chunk, Tokenizer};
pub use types::*;

//! The rereading agent.
//!
//! A run streams the document once with the original question to build the
//! root memory `M`. It then repeatedly asks the model whether `M` suffices;
//! each emitted sub-question triggers a fresh streaming pass that builds a
//! sub-memory, answers the sub-question from it, and merges the pair into `M`.
//! The final answer is produced from `M` alone.

use std::cell::Cell;
use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::advantage::{outcome_reward, Matcher};
use crate::backend::{BackendError, CallTag, Completer, CompletionRequest, LlmBackend};
use crate::prompt::{parse_boxed_answer, parse_query, PromptArgs, PromptError, PromptKind, PromptSet};
use crate::tokenizer::{chunk_document, Chunk};
use crate::types::{
    ConfigError, MemoryState, RunConfig, SnapshotError, SnapshotMode, SubQA, Task, TaskError, TrajectoryLog,
    NO_MEMORY,
};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Snapshots(#[from] SnapshotError),
}

/// An aborted run together with everything logged before the failure. The
/// log's `error` field is set.
#[derive(Debug, thiserror::Error)]
#[error("run of task `{}` failed: {error}", log.task_id)]
pub struct RunFailure {
    #[source]
    pub error: AgentError,
    pub log: Box<TrajectoryLog>,
}

/// Tracks the memory texts currently held by a run.
#[derive(Debug, Default)]
pub struct MemoryGauge {
    live: Cell<usize>,
    live_bytes: Cell<u64>,
    peak: Cell<usize>,
    peak_bytes: Cell<u64>,
}

impl MemoryGauge {
    pub fn hold(self: &Rc<Self>, text: impl Into<String>) -> LiveMemory {
        let text = text.into();
        let live = self.live.get() + 1;
        let bytes = self.live_bytes.get() + text.len() as u64;
        self.live.set(live);
        self.live_bytes.set(bytes);
        self.peak.set(self.peak.get().max(live));
        self.peak_bytes.set(self.peak_bytes.get().max(bytes));
        LiveMemory {
            text,
            gauge: Rc::clone(self),
        }
    }

    pub fn live(&self) -> usize {
        self.live.get()
    }

    /// Largest number of memory texts held at once.
    pub fn peak(&self) -> usize {
        self.peak.get()
    }

    /// Largest combined byte size of the memory texts held at once.
    pub fn peak_bytes(&self) -> u64 {
        self.peak_bytes.get()
    }
}

/// A memory text counted by a [`MemoryGauge`] until dropped.
#[derive(Debug)]
pub struct LiveMemory {
    text: String,
    gauge: Rc<MemoryGauge>,
}

impl LiveMemory {
    pub fn text(&self) -> &str {
        &self.text
    }
}

impl Drop for LiveMemory {
    fn drop(&mut self) {
        self.gauge.live.set(self.gauge.live.get() - 1);
        self.gauge.live_bytes.set(self.gauge.live_bytes.get() - self.text.len() as u64);
    }
}

/// Instrumentation gathered alongside a [`TrajectoryLog`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    /// Tags of every logical call, in issue order.
    pub trace: Vec<CallTag>,
    pub peak_live_memories: usize,
    pub chunks: usize,
}

impl RunStats {
    pub fn calls(&self, tag: CallTag) -> usize {
        self.trace.iter().filter(|t| **t == tag).count()
    }
}

/// Result of one streaming pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadPass {
    pub memory: MemoryState,
    /// Snapshots after every chunk, in order.
    pub snapshots: Vec<MemoryState>,
}

/// Answer produced from one logged memory snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAnswer {
    pub pass_index: u32,
    pub chunk_index: usize,
    pub answer: String,
    pub correct: bool,
}

pub struct Agent<'a> {
    backend: &'a dyn LlmBackend,
    config: &'a RunConfig,
    prompts: PromptSet,
}

impl<'a> Agent<'a> {
    pub fn new(backend: &'a dyn LlmBackend, config: &'a RunConfig) -> Self {
        Self {
            backend,
            config,
            prompts: PromptSet::default(),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn config(&self) -> &RunConfig {
        self.config
    }

    pub fn chunks(&self, task: &Task) -> Vec<Chunk> {
        chunk_document(&task.document, self.config.chunk_size_tokens, self.config.tokenizer)
    }

    /// Runs the full rereading workflow on `task`.
    pub fn run(&self, task: &Task) -> Result<TrajectoryLog, RunFailure> {
        self.run_with_stats(task).map(|(log, _)| log)
    }

    pub fn run_with_stats(&self, task: &Task) -> Result<(TrajectoryLog, RunStats), RunFailure> {
        let start = Instant::now();
        let mut session = Session::new(self, &task.id);
        let chunks = self.chunks(task);
        let outcome = self
            .config
            .validate()
            .map_err(AgentError::from)
            .and_then(|()| task.validate().map_err(AgentError::from))
            .and_then(|()| session.run(&task.question, &chunks));
        let (mut log, stats) = session.finish(chunks.len());
        log.wall_time_ms = start.elapsed().as_millis() as u64;
        match outcome {
            Ok(answer) => {
                log.final_answer = answer;
                Ok((log, stats))
            }
            Err(error) => {
                log.error = Some(error.to_string());
                Err(RunFailure { error, log: Box::new(log) })
            }
        }
    }

    /// One streaming pass over `chunks` with `question`, starting from
    /// `NO_MEMORY`. Without chunks no call is made and the sentinel is
    /// returned.
    pub fn memorize_while_reading(&self, question: &str, chunks: &[Chunk], pass_index: u32) -> Result<ReadPass, AgentError> {
        let mut session = Session::new(self, "");
        let memory = session.read_pass(question, chunks, pass_index)?;
        let chunk_index = chunks.len().saturating_sub(1);
        Ok(ReadPass {
            memory: MemoryState {
                text: memory.text().to_string(),
                pass_index,
                chunk_index,
            },
            snapshots: std::mem::take(&mut session.log.memories),
        })
    }

    /// Answers `question` from `memory` with a single call and extracts the
    /// boxed answer.
    pub fn answer_from_memory(&self, question: &str, memory: &str) -> Result<String, AgentError> {
        Session::new(self, "").answer(question, memory)
    }

    /// Answers the task question from every logged memory snapshot.
    pub fn answer_at_every_step(&self, task: &Task, log: &TrajectoryLog, matcher: Matcher) -> Result<Vec<StepAnswer>, AgentError> {
        let grid = log.snapshot_grid()?;
        let mut session = Session::new(self, &task.id);
        let mut out = Vec::new();
        for m in grid.into_iter().flatten() {
            let answer = session.answer(&task.question, &m.text)?;
            let correct = outcome_reward(&answer, &task.gold_answers, matcher) == 1.0;
            out.push(StepAnswer {
                pass_index: m.pass_index,
                chunk_index: m.chunk_index,
                answer,
                correct,
            });
        }
        Ok(out)
    }
}

/// Runs `task` with the built-in prompts.
pub fn run(task: &Task, config: &RunConfig, backend: &dyn LlmBackend) -> Result<TrajectoryLog, RunFailure> {
    Agent::new(backend, config).run(task)
}

struct Session<'s> {
    agent: &'s Agent<'s>,
    completer: Completer<'s>,
    gauge: Rc<MemoryGauge>,
    log: TrajectoryLog,
    trace: Vec<CallTag>,
}

impl<'s> Session<'s> {
    fn new(agent: &'s Agent<'s>, task_id: &str) -> Self {
        Self {
            agent,
            completer: Completer::new(agent.backend, agent.config.tokenizer),
            gauge: Rc::new(MemoryGauge::default()),
            log: TrajectoryLog {
                task_id: task_id.to_string(),
                ..TrajectoryLog::default()
            },
            trace: Vec::new(),
        }
    }

    fn render(&self, kind: PromptKind, args: &PromptArgs<'_>) -> Result<String, AgentError> {
        Ok(self.agent.prompts.render(kind, args)?)
    }

    fn call(&mut self, tag: CallTag, prompt: String) -> Result<String, AgentError> {
        let cfg = self.agent.config;
        self.trace.push(tag);
        let request = CompletionRequest::new(tag, prompt, cfg.max_response_tokens, cfg.temperature);
        Ok(self.completer.complete(&request)?)
    }

    fn read_pass(&mut self, question: &str, chunks: &[Chunk], pass_index: u32) -> Result<LiveMemory, AgentError> {
        let mut memory = self.gauge.hold(NO_MEMORY);
        for chunk in chunks {
            let prompt = self.render(PromptKind::Reading, &PromptArgs::new(question, memory.text()).chunk(&chunk.text))?;
            drop(memory);
            let text = self.call(CallTag::Read, prompt)?;
            let keep = match self.agent.config.snapshots {
                SnapshotMode::Full => true,
                SnapshotMode::LatestOnly => chunk.index + 1 == chunks.len(),
            };
            if keep {
                self.log.memories.push(MemoryState {
                    text: text.clone(),
                    pass_index,
                    chunk_index: chunk.index,
                });
            }
            memory = self.gauge.hold(text);
        }
        Ok(memory)
    }

    fn answer(&mut self, question: &str, memory: &str) -> Result<String, AgentError> {
        let prompt = self.render(PromptKind::Answering, &PromptArgs::new(question, memory))?;
        let out = self.call(CallTag::Answer, prompt)?;
        Ok(parse_boxed_answer(&out))
    }

    fn run(&mut self, question: &str, chunks: &[Chunk]) -> Result<String, AgentError> {
        let mut root = self.read_pass(question, chunks, 0)?;
        for pass in 1..=self.agent.config.max_rereading_passes {
            let prompt = self.render(
                PromptKind::Decomposing,
                &PromptArgs::new(question, root.text()).qa_history(&self.log.sub_qas),
            )?;
            let out = self.call(CallTag::Decompose, prompt)?;
            let Some(sub_question) = parse_query(&out) else {
                break;
            };
            let key = sub_question.to_lowercase();
            if self.log.sub_qas.iter().any(|qa| qa.sub_question.trim().to_lowercase() == key) {
                log::warn!("task `{}`: sub-question repeated: {sub_question}", self.log.task_id);
            }
            let sub_memory = self.read_pass(&sub_question, chunks, pass)?;
            let sub_answer = self.answer(&sub_question, sub_memory.text())?;
            drop(sub_memory);
            let prompt = self.render(
                PromptKind::Integrating,
                &PromptArgs::new(question, root.text()).subqa(&sub_question, &sub_answer),
            )?;
            drop(root);
            let merged = self.call(CallTag::Integrate, prompt)?;
            root = self.gauge.hold(merged.trim());
            self.log.sub_qas.push(SubQA {
                sub_question,
                sub_answer,
                pass_index: pass,
            });
        }
        let answer = self.answer(question, root.text())?;
        Ok(answer)
    }

    fn finish(self, chunks: usize) -> (TrajectoryLog, RunStats) {
        let mut log = self.log;
        log.rereading_passes = log.sub_qas.len() as u32;
        log.llm_calls = self.completer.counter().total();
        log.peak_memory_bytes = self.gauge.peak_bytes();
        let stats = RunStats {
            trace: self.trace,
            peak_live_memories: self.gauge.peak(),
            chunks,
        };
        (log, stats)
    }
}

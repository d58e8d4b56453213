//! Domain types shared by the agent, advantage computation, generator and
//! evaluation harness, plus the trajectory-log validator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::BackendConfig;
use crate::tokenizer::{chunk_document, Tokenizer};

/// Memory text fed to the first reading step of every pass.
pub const NO_MEMORY: &str = "NO_MEMORY";

pub const DEFAULT_CHUNK_SIZE_TOKENS: usize = 5000;
pub const DEFAULT_MAX_REREADING_PASSES: u32 = 3;
pub const DEFAULT_MAX_RESPONSE_TOKENS: usize = 1024;
pub const DEFAULT_ALPHA: f64 = 0.95;
pub const DEFAULT_EPSILON_STD: f64 = 1e-6;
/// Sampling temperature used when generating rollout groups.
pub const ROLLOUT_TEMPERATURE: f64 = 1.0;

/// A question over a long document with its accepted answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub question: String,
    pub document: String,
    pub gold_answers: Vec<String>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("task `{0}` has no gold answers")]
    NoGoldAnswers(String),
    #[error("task `{0}` has an empty question")]
    EmptyQuestion(String),
    #[error("task `{0}` has an empty document")]
    EmptyDocument(String),
}

impl Task {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.gold_answers.is_empty() {
            return Err(TaskError::NoGoldAnswers(self.id.clone()));
        }
        if self.question.trim().is_empty() {
            return Err(TaskError::EmptyQuestion(self.id.clone()));
        }
        if self.document.is_empty() {
            return Err(TaskError::EmptyDocument(self.id.clone()));
        }
        Ok(())
    }

    /// Length bucket from `meta["length"]`, if present and numeric.
    pub fn meta_length(&self) -> Option<u64> {
        self.meta.get("length").and_then(|v| v.parse().ok())
    }
}

/// Memory snapshot after reading chunk `chunk_index` during pass `pass_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryState {
    pub text: String,
    pub pass_index: u32,
    pub chunk_index: usize,
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubQA {
    pub sub_question: String,
    pub sub_answer: String,
    pub pass_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub task_id: String,
    pub memories: Vec<MemoryState>,
    pub sub_qas: Vec<SubQA>,
    pub final_answer: String,
    pub rereading_passes: u32,
    pub llm_calls: u64,
    pub peak_memory_bytes: u64,
    pub wall_time_ms: u64,
    /// Set when the run aborted; the log then holds whatever was recorded
    /// before the failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrajectoryLog {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    /// Memory snapshots of one pass, in chunk order.
    pub fn pass_memories(&self, pass: u32) -> impl Iterator<Item = &MemoryState> {
        self.memories.iter().filter(move |m| m.pass_index == pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trajectory `{task_id}` lacks full memory snapshots: {detail} (re-run with full snapshot logging)")]
pub struct SnapshotError {
    pub task_id: String,
    pub detail: String,
}

impl TrajectoryLog {
    /// Memory snapshots arranged as `[pass][chunk]`.
    ///
    /// Fails unless every pass `0..=rereading_passes` holds the same number of
    /// snapshots with chunk indices `0, 1, 2, …` in order. A log without any
    /// memories yields an empty grid.
    pub fn snapshot_grid(&self) -> Result<Vec<Vec<&MemoryState>>, SnapshotError> {
        if self.memories.is_empty() {
            return Ok(Vec::new());
        }
        let err = |detail: String| SnapshotError {
            task_id: self.task_id.clone(),
            detail,
        };
        let passes = self.rereading_passes as usize + 1;
        let mut grid: Vec<Vec<&MemoryState>> = vec![Vec::new(); passes];
        for m in &self.memories {
            let pass = m.pass_index as usize;
            let row = grid
                .get_mut(pass)
                .ok_or_else(|| err(format!("memory for pass {pass} beyond rereading_passes")))?;
            if m.chunk_index != row.len() {
                return Err(err(format!(
                    "pass {pass} has chunk {} where chunk {} was expected",
                    m.chunk_index,
                    row.len()
                )));
            }
            row.push(m);
        }
        let width = grid[0].len();
        if let Some((pass, row)) = grid.iter().enumerate().find(|(_, row)| row.len() != width) {
            return Err(err(format!("pass {pass} has {} snapshots, pass 0 has {width}", row.len())));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub task_id: String,
    pub trajectories: Vec<TrajectoryLog>,
    pub rewards: Vec<f64>,
}

/// How many memory snapshots a run records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMode {
    /// Every (pass, chunk) memory. Required by state rewards and diagnostics.
    #[default]
    Full,
    /// Only the final memory of each pass.
    LatestOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chunk_size_tokens: usize,
    pub max_rereading_passes: u32,
    pub max_response_tokens: usize,
    pub alpha: f64,
    pub epsilon_std: f64,
    /// Greedy by default for reproducible evaluation; use
    /// [`ROLLOUT_TEMPERATURE`] when sampling rollout groups.
    pub temperature: f64,
    pub tokenizer: Tokenizer,
    pub snapshots: SnapshotMode,
    pub backend: BackendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            chunk_size_tokens: DEFAULT_CHUNK_SIZE_TOKENS,
            max_rereading_passes: DEFAULT_MAX_REREADING_PASSES,
            max_response_tokens: DEFAULT_MAX_RESPONSE_TOKENS,
            alpha: DEFAULT_ALPHA,
            epsilon_std: DEFAULT_EPSILON_STD,
            temperature: 0.0,
            tokenizer: Tokenizer::default(),
            snapshots: SnapshotMode::default(),
            backend: BackendConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("chunk_size_tokens must be positive")]
    ZeroChunkSize,
    #[error("max_response_tokens must be positive")]
    ZeroResponseTokens,
    #[error("alpha must be in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("epsilon must be a non-negative finite number, got {0}")]
    BadEpsilon(f64),
    #[error("temperature must be a non-negative finite number, got {0}")]
    BadTemperature(f64),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chunk_size_tokens == 0 {
            return Err(ConfigError::ZeroChunkSize);
        }
        if self.max_response_tokens == 0 {
            return Err(ConfigError::ZeroResponseTokens);
        }
        check_alpha(self.alpha)?;
        check_epsilon(self.epsilon_std)?;
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ConfigError::BadTemperature(self.temperature));
        }
        Ok(())
    }
}

pub fn check_alpha(alpha: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ConfigError::AlphaOutOfRange(alpha))
    }
}

pub fn check_epsilon(epsilon: f64) -> Result<(), ConfigError> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::BadEpsilon(epsilon))
    }
}

/// One broken invariant in a trajectory log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub task_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &str, message: String) {
        self.violations.push(Violation {
            field: field.to_string(),
            message,
        });
    }
}

/// Closed-form logical call count of one agent run.
///
/// `chunks` reading steps per pass over `passes + 1` passes, one decompose
/// call per loop iteration (`decomposes`), a reread answer plus an integrate
/// call per completed rereading, and the final answer.
pub fn expected_llm_calls(chunks: usize, passes: u32, decomposes: u32) -> u64 {
    let p = u64::from(passes);
    chunks as u64 * (p + 1) + u64::from(decomposes) + 2 * p + 1
}

/// Number of decompose calls a completed run issued: the loop only stops
/// before the budget through a decompose call that produced no query.
pub fn decompose_calls(passes: u32, max_rereading_passes: u32) -> u32 {
    if passes < max_rereading_passes {
        passes + 1
    } else {
        passes
    }
}

/// Checks `log` against every invariant of the trajectory schema. Never fails:
/// problems are returned as data.
pub fn validate_trajectory(log: &TrajectoryLog, config: &RunConfig, task: &Task) -> ValidationReport {
    let mut report = ValidationReport {
        task_id: log.task_id.clone(),
        violations: Vec::new(),
    };

    if log.task_id != task.id {
        report.push(
            "task_id",
            format!("log is for task `{}` but was checked against `{}`", log.task_id, task.id),
        );
    }
    if let Some(err) = &log.error {
        report.push("error", format!("run is incomplete: {err}"));
    }

    let passes = log.rereading_passes;
    if log.sub_qas.len() != passes as usize {
        report.push(
            "sub_qas",
            format!(
                "sub_qas has {} entries but rereading_passes is {}",
                log.sub_qas.len(),
                passes
            ),
        );
    }
    if passes > config.max_rereading_passes {
        report.push(
            "rereading_passes",
            format!(
                "rereading_passes {} exceeds the limit {}",
                passes, config.max_rereading_passes
            ),
        );
    }
    for (i, qa) in log.sub_qas.iter().enumerate() {
        if qa.sub_question.trim().is_empty() {
            report.push("sub_qas", format!("sub_qas[{i}] has an empty sub_question"));
        }
        if qa.pass_index as usize != i + 1 {
            report.push(
                "sub_qas",
                format!("sub_qas[{i}] has pass_index {} (expected {})", qa.pass_index, i + 1),
            );
        }
    }

    let chunks = chunk_document(&task.document, config.chunk_size_tokens.max(1), config.tokenizer).len();
    check_memories(&mut report, log, config, chunks);

    let expected = expected_llm_calls(chunks, passes, decompose_calls(passes, config.max_rereading_passes));
    if log.error.is_none() && log.llm_calls != expected {
        report.push(
            "llm_calls",
            format!(
                "llm_calls is {} but the closed form gives {} (T={}, p={})",
                log.llm_calls, expected, chunks, passes
            ),
        );
    }
    report
}

fn check_memories(report: &mut ValidationReport, log: &TrajectoryLog, config: &RunConfig, chunks: usize) {
    let passes = log.rereading_passes;
    for m in &log.memories {
        if m.pass_index > config.max_rereading_passes {
            report.push(
                "memories",
                format!(
                    "memory at pass {} chunk {} exceeds the rereading limit {}",
                    m.pass_index, m.chunk_index, config.max_rereading_passes
                ),
            );
        }
        if m.pass_index > passes {
            report.push(
                "memories",
                format!(
                    "memory at pass {} chunk {} belongs to a pass beyond rereading_passes {}",
                    m.pass_index, m.chunk_index, passes
                ),
            );
        }
        let tokens = config.tokenizer.count(&m.text);
        if tokens > config.max_response_tokens {
            report.push(
                "memories",
                format!(
                    "memory at pass {} chunk {} has {} tokens, above max_response_tokens {}",
                    m.pass_index, m.chunk_index, tokens, config.max_response_tokens
                ),
            );
        }
    }

    let expected_chunks: Vec<usize> = match config.snapshots {
        SnapshotMode::Full => (0..chunks).collect(),
        SnapshotMode::LatestOnly => chunks.checked_sub(1).into_iter().collect(),
    };
    for pass in 0..=passes {
        let got: Vec<usize> = log.pass_memories(pass).map(|m| m.chunk_index).collect();
        if got == expected_chunks {
            continue;
        }
        let missing: Vec<usize> = expected_chunks.iter().copied().filter(|c| !got.contains(c)).collect();
        let message = if !missing.is_empty() {
            format!("pass {pass} is missing memories for chunks {missing:?}")
        } else {
            format!("pass {pass} has chunk entries {got:?}, expected {expected_chunks:?}")
        };
        report.push("memories", message);
    }
}

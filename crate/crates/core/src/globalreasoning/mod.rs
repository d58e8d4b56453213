//! Synthetic Global Reasoning benchmark.
//!
//! Each sample hides `n` indirect facts and as many distractors in background
//! prose. The indirect facts only become recognisable as relevant once the
//! single direct fact is read, and that fact is planted in the second half of
//! the document. Two task families exist: *statistics* (count the distinct
//! event types registered by an aliased facility) and *variable tracking*
//! (report the last value logged for an aliased configuration variable).

pub mod facts;
pub mod padding;
pub mod solver;
pub mod vocab;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use facts::{build_facts, FactSet};
pub use padding::{pad_context, split_sentences, Corpus, PaddedDocument, Placement, DIRECT_RANGE};
pub use solver::{solve, SolveError};

use crate::jsonl::{write_jsonl, JsonlError};
use crate::tokenizer::Tokenizer;
use crate::types::Task;

pub const MIN_FACTS: usize = 3;
pub const MAX_FACTS: usize = 10;

/// The eleven context lengths of the standard grid, 1K to 1M tokens.
pub const LENGTH_GRID: [usize; 11] = [
    1 << 10,
    1 << 11,
    1 << 12,
    1 << 13,
    1 << 14,
    1 << 15,
    1 << 16,
    1 << 17,
    1 << 18,
    1 << 19,
    1 << 20,
];

pub const SAMPLES_PER_LENGTH: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("background corpus is empty")]
    EmptyCorpus,
    #[error("fact count must be in [3, 10], got {0}")]
    FactCount(usize),
    #[error("target of {target} tokens is too small for {facts} tokens of planted facts")]
    TargetTooSmall { target: usize, facts: usize },
    #[error("no sentence boundary in the allowed direct-fact range for target {target}")]
    NoDirectSlot { target: usize },
    #[error("per_length must be at least 1")]
    ZeroPerLength,
    #[error("bad length `{0}` (expected e.g. 1024, 8k or 1m)")]
    BadLength(String),
    #[error("unknown task type `{0}` (expected `statistics` or `variable-tracking`)")]
    UnknownTaskType(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskType {
    Statistics,
    VariableTracking,
}

impl TaskType {
    pub const ALL: [TaskType; 2] = [TaskType::Statistics, TaskType::VariableTracking];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Statistics => "statistics",
            TaskType::VariableTracking => "variable-tracking",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskType {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "statistics" => Ok(TaskType::Statistics),
            "variable-tracking" | "variable_tracking" => Ok(TaskType::VariableTracking),
            other => Err(GenError::UnknownTaskType(other.to_string())),
        }
    }
}

/// Parameters of one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub task_type: TaskType,
    pub target_tokens: usize,
    /// `None` draws uniformly from 3..=10.
    pub n_facts: Option<usize>,
    /// `None` uses one distractor per indirect fact.
    pub n_distractors: Option<usize>,
    pub seed: u64,
    pub tokenizer: Tokenizer,
}

impl GenSpec {
    pub fn new(task_type: TaskType, target_tokens: usize, seed: u64) -> Self {
        Self {
            task_type,
            target_tokens,
            n_facts: None,
            n_distractors: None,
            seed,
            tokenizer: Tokenizer::default(),
        }
    }
}

/// Sidecar record describing how a sample was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub id: String,
    pub task_type: TaskType,
    pub target_tokens: usize,
    pub token_count: usize,
    pub n_facts: usize,
    pub sample_seed: String,
    pub corpus_start: usize,
    pub cycled: bool,
    pub facts: FactSet,
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedSample {
    pub task: Task,
    pub meta: SampleMeta,
}

/// RNG seed of sample `index` at `length`, derived by hashing so that every
/// sample has an independent stream.
pub fn sample_seed(seed: u64, task_type: TaskType, length: usize, index: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(task_type.as_str().as_bytes());
    h.update((length as u64).to_le_bytes());
    h.update((index as u64).to_le_bytes());
    h.finalize().into()
}

/// Short label for a length: `1k`, `32k`, `1m`, or the plain number.
pub fn length_label(tokens: usize) -> String {
    if tokens >= 1 << 20 && tokens % (1 << 20) == 0 {
        format!("{}m", tokens >> 20)
    } else if tokens >= 1 << 10 && tokens % (1 << 10) == 0 {
        format!("{}k", tokens >> 10)
    } else {
        tokens.to_string()
    }
}

/// Parses `1024`, `8k` / `8K` (×1024) or `1m` / `1M` (×1024²).
pub fn parse_length(s: &str) -> Result<usize, GenError> {
    let t = s.trim();
    let bad = || GenError::BadLength(s.to_string());
    let (digits, scale) = match t.char_indices().last().ok_or_else(bad)? {
        (i, 'k' | 'K') => (&t[..i], 1 << 10),
        (i, 'm' | 'M') => (&t[..i], 1 << 20),
        _ => (t, 1),
    };
    let n: usize = digits.parse().map_err(|_| bad())?;
    match n.checked_mul(scale) {
        Some(v) if v > 0 => Ok(v),
        _ => Err(bad()),
    }
}

/// Comma-separated list of [`parse_length`] values.
pub fn parse_lengths(s: &str) -> Result<Vec<usize>, GenError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_length).collect()
}

/// Builds one sample. `spec.seed` is the dataset seed; `index` selects the
/// sample within its length bucket.
pub fn generate_sample(spec: &GenSpec, index: usize, corpus: &Corpus) -> Result<PlacedSample, GenError> {
    let seed = sample_seed(spec.seed, spec.task_type, spec.target_tokens, index);
    let mut rng = ChaCha8Rng::from_seed(seed);
    let facts = build_facts(spec, &mut rng)?;
    let padded = pad_context(&facts, spec, corpus, &mut rng)?;
    let id = format!("{}-{}-{index:04}", spec.task_type, length_label(spec.target_tokens));
    let token_count = corpus.tokenizer().count(&padded.document);
    let n_facts = facts.n_facts();
    let meta: BTreeMap<String, String> = [
        ("task_type", spec.task_type.to_string()),
        ("length", spec.target_tokens.to_string()),
        ("n_facts", n_facts.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let task = Task {
        id: id.clone(),
        question: facts.question.clone(),
        document: padded.document,
        gold_answers: vec![facts.answer.clone()],
        meta,
    };
    Ok(PlacedSample {
        task,
        meta: SampleMeta {
            id,
            task_type: spec.task_type,
            target_tokens: spec.target_tokens,
            token_count,
            n_facts,
            sample_seed: seed.iter().map(|b| format!("{b:02x}")).collect(),
            corpus_start: padded.corpus_start,
            cycled: padded.cycled,
            facts,
            placement: padded.placement,
        },
    })
}

/// Dataset-level generation parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub task_type: TaskType,
    pub lengths: Vec<usize>,
    pub per_length: usize,
    pub seed: u64,
    pub n_facts: Option<usize>,
    pub n_distractors: Option<usize>,
    pub tokenizer: Tokenizer,
}

/// All samples for every length, ordered by length then index. Samples are
/// built in parallel; the output does not depend on the thread count.
pub fn generate_dataset(spec: &DatasetSpec, corpus: &Corpus) -> Result<Vec<PlacedSample>, GenError> {
    if spec.per_length == 0 {
        return Err(GenError::ZeroPerLength);
    }
    let jobs: Vec<(usize, usize)> = spec
        .lengths
        .iter()
        .flat_map(|&len| (0..spec.per_length).map(move |i| (len, i)))
        .collect();
    jobs.par_iter()
        .map(|&(len, index)| {
            let sample_spec = GenSpec {
                task_type: spec.task_type,
                target_tokens: len,
                n_facts: spec.n_facts,
                n_distractors: spec.n_distractors,
                seed: spec.seed,
                tokenizer: spec.tokenizer,
            };
            generate_sample(&sample_spec, index, corpus)
        })
        .collect()
}

/// `<out>.meta.jsonl`
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.jsonl");
    PathBuf::from(s)
}

/// Writes the task JSONL to `out` and the sidecar metadata next to it.
pub fn write_dataset(samples: &[PlacedSample], out: &Path) -> Result<(), GenError> {
    write_jsonl(out, samples.iter().map(|s| &s.task))?;
    write_jsonl(meta_path(out), samples.iter().map(|s| &s.meta))?;
    Ok(())
}

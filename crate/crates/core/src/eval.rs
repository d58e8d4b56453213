//! Batch evaluation: runs the agent over a task set, scores the answers and
//! aggregates metrics per context-length bucket.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advantage::{outcome_reward, Matcher};
use crate::agent::{Agent, AgentError, StepAnswer};
use crate::backend::LlmBackend;
use crate::prompt::PromptSet;
use crate::tokenizer::{count_tokens, Tokenizer};
use crate::types::{RunConfig, Task, TrajectoryLog};

pub const DEFAULT_ERROR_THRESHOLD: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("trajectory for unknown task `{0}`")]
    UnknownTask(String),
    #[error("diagnostics for task `{task_id}`: {source}")]
    Diagnostics {
        task_id: String,
        #[source]
        source: AgentError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Number of concurrent agent runs.
    pub parallel: usize,
    pub matcher: Matcher,
    /// Highest tolerated fraction of runs that failed with an error.
    pub error_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            parallel: 1,
            matcher: Matcher::default(),
            error_threshold: DEFAULT_ERROR_THRESHOLD,
        }
    }
}

/// Metrics keyed by length bucket (tokens). `eta` is keyed by the rereading
/// budget and is only filled by [`sweep`] or [`EvalReport::with_eta`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub max_rereading_passes: u32,
    pub accuracy: BTreeMap<u64, f64>,
    pub avg_rereading: BTreeMap<u64, f64>,
    pub avg_calls: BTreeMap<u64, f64>,
    pub avg_wall_ms: BTreeMap<u64, f64>,
    pub peak_memory_bytes: BTreeMap<u64, u64>,
    pub samples: BTreeMap<u64, usize>,
    pub eta: BTreeMap<u32, f64>,
    pub n_samples: usize,
    pub n_errors: usize,
}

impl EvalReport {
    /// Mean of the per-length accuracies.
    pub fn average_accuracy(&self) -> f64 {
        if self.accuracy.is_empty() {
            return 0.0;
        }
        self.accuracy.values().sum::<f64>() / self.accuracy.len() as f64
    }

    pub fn error_rate(&self) -> f64 {
        if self.n_samples == 0 {
            0.0
        } else {
            self.n_errors as f64 / self.n_samples as f64
        }
    }

    pub fn breaches(&self, threshold: f64) -> bool {
        self.error_rate() > threshold
    }

    pub fn with_eta(mut self, eta: BTreeMap<u32, f64>) -> Self {
        self.eta = eta;
        self
    }

    /// Plain-text table, one row per length bucket.
    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:>10} {:>8} {:>9} {:>9} {:>10} {:>11} {:>12}\n",
            "length", "samples", "accuracy", "passes", "calls", "wall_ms", "peak_bytes"
        );
        for (len, acc) in &self.accuracy {
            out.push_str(&format!(
                "{:>10} {:>8} {:>9.4} {:>9.3} {:>10.1} {:>11.1} {:>12}\n",
                len,
                self.samples[len],
                acc,
                self.avg_rereading[len],
                self.avg_calls[len],
                self.avg_wall_ms[len],
                self.peak_memory_bytes[len]
            ));
        }
        out.push_str(&format!(
            "average accuracy {:.4} over {} samples, {} errors (p_c = {})\n",
            self.average_accuracy(),
            self.n_samples,
            self.n_errors,
            self.max_rereading_passes
        ));
        for (k, v) in &self.eta {
            out.push_str(&format!("eta[p_c={k}] = {v:.4}\n"));
        }
        out
    }
}

/// Per-pass gain `(avg_k − avg_0) / k` for every budget `k > 0`, given the
/// average accuracy at each budget. Empty without a `k = 0` entry.
pub fn eta(averages: &BTreeMap<u32, f64>) -> BTreeMap<u32, f64> {
    let Some(&base) = averages.get(&0) else {
        return BTreeMap::new();
    };
    averages
        .iter()
        .filter(|(k, _)| **k > 0)
        .map(|(&k, &avg)| (k, (avg - base) / f64::from(k)))
        .collect()
}

/// [`eta`] over reports keyed by rereading budget, using each report's
/// average of per-length accuracies.
pub fn eta_from_reports(reports: &BTreeMap<u32, EvalReport>) -> BTreeMap<u32, f64> {
    eta(&reports.iter().map(|(k, r)| (*k, r.average_accuracy())).collect())
}

/// Length bucket of a task: `meta["length"]` when present, otherwise the
/// measured token count rounded to the nearest power of two.
pub fn length_bucket(task: &Task, tokenizer: Tokenizer) -> u64 {
    if let Some(len) = task.meta_length() {
        return len;
    }
    nearest_power_of_two(count_tokens(&task.document, tokenizer) as u64)
}

fn nearest_power_of_two(n: u64) -> u64 {
    if n <= 1 {
        return 1;
    }
    let hi = n.next_power_of_two();
    let lo = hi / 2;
    if hi - n < n - lo {
        hi
    } else {
        lo
    }
}

pub fn is_correct(log: &TrajectoryLog, task: &Task, matcher: Matcher) -> bool {
    log.error.is_none() && outcome_reward(&log.final_answer, &task.gold_answers, matcher) == 1.0
}

#[derive(Default)]
struct Bucket {
    n: usize,
    correct: usize,
    passes: u64,
    calls: u64,
    wall_ms: u64,
    peak_bytes: u64,
}

/// Aggregates logs into a report. `logs[i]` must belong to `tasks[i]`.
pub fn build_report(tasks: &[Task], logs: &[TrajectoryLog], config_passes: u32, tokenizer: Tokenizer, matcher: Matcher) -> EvalReport {
    let mut buckets: BTreeMap<u64, Bucket> = BTreeMap::new();
    let mut n_errors = 0;
    for (task, log) in tasks.iter().zip(logs) {
        let b = buckets.entry(length_bucket(task, tokenizer)).or_default();
        b.n += 1;
        b.correct += usize::from(is_correct(log, task, matcher));
        b.passes += u64::from(log.rereading_passes);
        b.calls += log.llm_calls;
        b.wall_ms += log.wall_time_ms;
        b.peak_bytes = b.peak_bytes.max(log.peak_memory_bytes);
        n_errors += usize::from(log.error.is_some());
    }
    let mut report = EvalReport {
        max_rereading_passes: config_passes,
        n_samples: logs.len().min(tasks.len()),
        n_errors,
        ..EvalReport::default()
    };
    for (len, b) in buckets {
        let n = b.n as f64;
        report.accuracy.insert(len, b.correct as f64 / n);
        report.avg_rereading.insert(len, b.passes as f64 / n);
        report.avg_calls.insert(len, b.calls as f64 / n);
        report.avg_wall_ms.insert(len, b.wall_ms as f64 / n);
        report.peak_memory_bytes.insert(len, b.peak_bytes);
        report.samples.insert(len, b.n);
    }
    report
}

/// Pairs every log with its task by id, in log order.
pub fn match_tasks<'t>(tasks: &'t [Task], logs: &[TrajectoryLog]) -> Result<Vec<&'t Task>, EvalError> {
    let by_id: HashMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    logs.iter()
        .map(|l| {
            by_id
                .get(l.task_id.as_str())
                .copied()
                .ok_or_else(|| EvalError::UnknownTask(l.task_id.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// One log per task, in task order. Failed runs carry `error`.
    pub trajectories: Vec<TrajectoryLog>,
    pub report: EvalReport,
}

fn pool(parallel: usize) -> Result<rayon::ThreadPool, EvalError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(parallel.max(1)).build()?)
}

/// Runs `agent` on every task with at most `options.parallel` concurrent
/// runs. Backend failures are recorded in the returned logs and count as
/// incorrect; they never stop the batch.
pub fn evaluate(tasks: &[Task], agent: &Agent<'_>, options: &EvalOptions) -> Result<Evaluation, EvalError> {
    let trajectories: Vec<TrajectoryLog> = pool(options.parallel)?.install(|| {
        tasks
            .par_iter()
            .map(|task| match agent.run(task) {
                Ok(log) => log,
                Err(failure) => {
                    log::warn!("{failure}");
                    *failure.log
                }
            })
            .collect()
    });
    let cfg = agent.config();
    let report = build_report(tasks, &trajectories, cfg.max_rereading_passes, cfg.tokenizer, options.matcher);
    Ok(Evaluation { trajectories, report })
}

/// Evaluates once per rereading budget in `budgets`, overriding
/// `max_rereading_passes` of `base`, and fills `eta` on every report.
pub fn sweep(
    tasks: &[Task],
    backend: &dyn LlmBackend,
    base: &RunConfig,
    prompts: &PromptSet,
    budgets: &[u32],
    options: &EvalOptions,
) -> Result<BTreeMap<u32, Evaluation>, EvalError> {
    let mut out = BTreeMap::new();
    for &k in budgets {
        let cfg = RunConfig {
            max_rereading_passes: k,
            ..base.clone()
        };
        let agent = Agent::new(backend, &cfg).with_prompts(prompts.clone());
        out.insert(k, evaluate(tasks, &agent, options)?);
    }
    let reports: BTreeMap<u32, EvalReport> = out.iter().map(|(k, e)| (*k, e.report.clone())).collect();
    let etas = eta_from_reports(&reports);
    for e in out.values_mut() {
        e.report.eta = etas.clone();
    }
    Ok(out)
}

/// Accuracy of answers given from the memory at one `(pass, chunk)` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPoint {
    pub step: usize,
    pub pass: u32,
    pub chunk: usize,
    pub samples: usize,
    pub accuracy: f64,
}

/// Averages per-sample step answers into a curve ordered by pass, then chunk.
pub fn step_curve(per_sample: &[Vec<StepAnswer>]) -> Vec<StepPoint> {
    let mut cells: BTreeMap<(u32, usize), (usize, usize)> = BTreeMap::new();
    for s in per_sample.iter().flatten() {
        let cell = cells.entry((s.pass_index, s.chunk_index)).or_default();
        cell.0 += 1;
        cell.1 += usize::from(s.correct);
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(step, ((pass, chunk), (n, correct)))| StepPoint {
            step,
            pass,
            chunk,
            samples: n,
            accuracy: correct as f64 / n as f64,
        })
        .collect()
}

/// Answers from every logged memory snapshot of every trajectory.
pub fn diagnostics(tasks: &[Task], logs: &[TrajectoryLog], agent: &Agent<'_>, options: &EvalOptions) -> Result<Vec<StepPoint>, EvalError> {
    let paired = match_tasks(tasks, logs)?;
    let per_sample = pool(options.parallel)?.install(|| {
        logs.par_iter()
            .zip(paired)
            .map(|(log, task)| {
                agent
                    .answer_at_every_step(task, log, options.matcher)
                    .map_err(|source| EvalError::Diagnostics {
                        task_id: task.id.clone(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(step_curve(&per_sample))
}

pub fn write_step_csv<W: Write>(points: &[StepPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "step,pass,chunk,samples,accuracy")?;
    for p in points {
        writeln!(out, "{},{},{},{},{}", p.step, p.pass, p.chunk, p.samples, p.accuracy)?;
    }
    Ok(())
}

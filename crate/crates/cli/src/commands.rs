use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use log::{debug, info, warn};

use memreread::eval::{diagnostics, match_tasks, sweep, write_step_csv, EvalReport};
use memreread::globalreasoning::{generate_dataset, parse_lengths, write_dataset, Corpus, DatasetSpec, GenError, TaskType, SAMPLES_PER_LENGTH};
use memreread::jsonl::{read_jsonl, write_jsonl};
use memreread::{
    check_alpha, check_epsilon, evaluate, outcome_reward, overall_advantages, validate_trajectory, Agent, AdvantageError,
    LlmBackend, Matcher, PromptSet, RolloutGroup, Task, Tokenizer, TrajectoryLog, DEFAULT_ALPHA, DEFAULT_EPSILON_STD,
};

use crate::config::{CliConfig, ConfigArgs};
use crate::error::{CliError, CliResult, Kind, WithKind};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Task family: `statistics` or `variable-tracking`.
    #[arg(long)]
    pub task: TaskType,
    /// Comma-separated target lengths in tokens, e.g. `1k,2k,32k`.
    #[arg(long, value_name = "LIST")]
    pub lengths: String,
    /// Samples per target length.
    #[arg(long, value_name = "N", default_value_t = SAMPLES_PER_LENGTH)]
    pub per_length: usize,
    /// Dataset seed; each sample derives its own seed from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Background text used as padding.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Task JSONL to write; metadata goes to `<out>.meta.jsonl`.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Fixed number of planted facts in [3, 10] instead of a random one.
    #[arg(long, value_name = "N")]
    pub n_facts: Option<usize>,
    /// Fixed number of distractor statements.
    #[arg(long, value_name = "N")]
    pub n_distractors: Option<usize>,
    /// Token counter used to size documents: `whitespace` or `char4`.
    #[arg(long, default_value_t = Tokenizer::Whitespace)]
    pub tokenizer: Tokenizer,
}

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let lengths = parse_lengths(&args.lengths).kind(Kind::Config)?;
    let text = fs::read_to_string(&args.corpus)
        .with_context(|| format!("cannot read corpus {}", args.corpus.display()))
        .kind(Kind::Config)?;
    let corpus = Corpus::new(&text, args.tokenizer).kind(Kind::Config)?;
    let spec = DatasetSpec {
        task_type: args.task,
        lengths,
        per_length: args.per_length,
        seed: args.seed,
        n_facts: args.n_facts,
        n_distractors: args.n_distractors,
        tokenizer: args.tokenizer,
    };
    let samples = generate_dataset(&spec, &corpus).map_err(|e| {
        let kind = match e {
            GenError::Jsonl(_) | GenError::NoDirectSlot { .. } => Kind::Runtime,
            _ => Kind::Config,
        };
        CliError::new(kind, e)
    })?;
    write_dataset(&samples, &args.out).kind(Kind::Runtime)?;
    info!("wrote {} samples to {}", samples.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Task JSONL to evaluate.
    #[arg(long, value_name = "PATH")]
    pub tasks: Option<PathBuf>,
    /// Where to write trajectory logs (JSONL).
    #[arg(long, value_name = "PATH")]
    pub out_traj: Option<PathBuf>,
    /// Where to write the metrics report (JSON).
    #[arg(long, value_name = "PATH")]
    pub out_report: Option<PathBuf>,
    /// Evaluate once per rereading budget in this comma-separated list and
    /// report the per-pass gain. Trajectories of budget k go to
    /// `<out-traj stem>.pc<k>.<ext>`.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub pc_sweep: Option<Vec<u32>>,
    /// Also answer from every logged memory snapshot and write the
    /// accuracy-per-step curve as CSV.
    #[arg(long, value_name = "PATH")]
    pub diagnostics_csv: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn resolve(args: &ConfigArgs) -> CliResult<CliConfig> {
    let cfg = args.resolve().kind(Kind::Config)?;
    debug!("effective config: {}", cfg.redacted_json());
    Ok(cfg)
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| CliError::msg(Kind::Config, format!("{flag} is required (flag or config file)")))
}

fn load_tasks(path: &Path) -> CliResult<Vec<Task>> {
    let tasks: Vec<Task> = read_jsonl(path).kind(Kind::Config)?;
    for t in &tasks {
        t.validate().kind(Kind::Config)?;
    }
    Ok(tasks)
}

fn load_logs(path: &Path) -> CliResult<Vec<TrajectoryLog>> {
    read_jsonl(path).kind(Kind::Config)
}

fn load_prompts(cfg: &CliConfig) -> CliResult<PromptSet> {
    match &cfg.cli.prompt_dir {
        Some(dir) if !dir.is_dir() => Err(CliError::msg(Kind::Config, format!("prompt directory {} does not exist", dir.display()))),
        Some(dir) => PromptSet::load_dir(dir).kind(Kind::Config),
        None => Ok(PromptSet::default()),
    }
}

fn build_backend(cfg: &CliConfig) -> CliResult<Box<dyn LlmBackend>> {
    cfg.run.backend.build().map_err(|e| {
        let kind = if e.is_config() { Kind::Config } else { Kind::Runtime };
        CliError::new(kind, e)
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .kind(Kind::Runtime)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).kind(Kind::Runtime)?;
    writeln!(w).and_then(|_| w.flush()).kind(Kind::Runtime)
}

/// `dir/name.jsonl` becomes `dir/name.pc3.jsonl`.
pub fn budget_path(path: &Path, k: u32) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.pc{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}.pc{k}"),
    };
    path.with_file_name(name)
}

fn threshold_check(report: &EvalReport, threshold: f64) -> CliResult<()> {
    if report.breaches(threshold) {
        return Err(CliError::msg(
            Kind::Threshold,
            format!(
                "{} of {} runs failed ({:.1}% > {:.1}% threshold)",
                report.n_errors,
                report.n_samples,
                100.0 * report.error_rate(),
                100.0 * threshold
            ),
        ));
    }
    Ok(())
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let mut cfg = resolve(&args.config)?;
    if args.tasks.is_some() {
        cfg.cli.tasks.clone_from(&args.tasks);
    }
    if args.out_traj.is_some() {
        cfg.cli.out_traj.clone_from(&args.out_traj);
    }
    if args.out_report.is_some() {
        cfg.cli.out_report.clone_from(&args.out_report);
    }
    if args.pc_sweep.is_some() {
        cfg.cli.pc_sweep.clone_from(&args.pc_sweep);
    }
    if args.diagnostics_csv.is_some() {
        cfg.cli.diagnostics_csv.clone_from(&args.diagnostics_csv);
    }
    let tasks = load_tasks(required(&cfg.cli.tasks, "--tasks")?)?;
    let out_traj = required(&cfg.cli.out_traj, "--out-traj")?.to_path_buf();
    let prompts = load_prompts(&cfg)?;
    let backend = build_backend(&cfg)?;
    let options = cfg.eval_options();
    info!("evaluating {} tasks with {} workers", tasks.len(), options.parallel);

    let evaluations = match &cfg.cli.pc_sweep {
        Some(budgets) if budgets.is_empty() => return Err(CliError::msg(Kind::Config, "--pc-sweep needs at least one budget")),
        Some(budgets) => sweep(&tasks, backend.as_ref(), &cfg.run, &prompts, budgets, &options).kind(Kind::Runtime)?,
        None => {
            let agent = Agent::new(backend.as_ref(), &cfg.run).with_prompts(prompts.clone());
            BTreeMap::from([(cfg.run.max_rereading_passes, evaluate(&tasks, &agent, &options).kind(Kind::Runtime)?)])
        }
    };
    let swept = cfg.cli.pc_sweep.is_some();

    let mut stdout = io::stdout().lock();
    for (k, e) in &evaluations {
        let path = if swept { budget_path(&out_traj, *k) } else { out_traj.clone() };
        write_jsonl(&path, &e.trajectories).kind(Kind::Runtime)?;
        if swept {
            writeln!(stdout, "p_c = {k}").kind(Kind::Runtime)?;
        }
        write!(stdout, "{}", e.report.render_table()).kind(Kind::Runtime)?;
    }
    if let Some(path) = &cfg.cli.out_report {
        if swept {
            let reports: BTreeMap<u32, &EvalReport> = evaluations.iter().map(|(k, e)| (*k, &e.report)).collect();
            write_json(path, &reports)?;
        } else {
            write_json(path, &evaluations.values().next().map(|e| &e.report))?;
        }
    }

    if let Some(csv) = &cfg.cli.diagnostics_csv {
        for (k, e) in &evaluations {
            let run_cfg = memreread::RunConfig {
                max_rereading_passes: *k,
                ..cfg.run.clone()
            };
            let agent = Agent::new(backend.as_ref(), &run_cfg).with_prompts(prompts.clone());
            let complete: Vec<TrajectoryLog> = e.trajectories.iter().filter(|l| l.is_complete()).cloned().collect();
            let points = diagnostics(&tasks, &complete, &agent, &options).kind(Kind::Runtime)?;
            let path = if swept { budget_path(csv, *k) } else { csv.clone() };
            let file = File::create(&path)
                .with_context(|| format!("cannot create {}", path.display()))
                .kind(Kind::Runtime)?;
            write_step_csv(&points, BufWriter::new(file)).kind(Kind::Runtime)?;
        }
    }

    for e in evaluations.values() {
        threshold_check(&e.report, options.error_threshold)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Task JSONL the trajectories were produced from.
    #[arg(long, value_name = "PATH")]
    pub tasks: PathBuf,
    /// Trajectory JSONL to summarize.
    #[arg(long, value_name = "PATH")]
    pub traj: PathBuf,
    /// Also write the report as JSON here.
    #[arg(long, value_name = "PATH")]
    pub out_report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Tasks reordered to line up with `logs`.
fn paired(tasks: &[Task], logs: &[TrajectoryLog]) -> CliResult<Vec<Task>> {
    Ok(match_tasks(tasks, logs).kind(Kind::Config)?.into_iter().cloned().collect())
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    let cfg = resolve(&args.config)?;
    let tasks = load_tasks(&args.tasks)?;
    let logs = load_logs(&args.traj)?;
    let tasks = paired(&tasks, &logs)?;
    let report = memreread::eval::build_report(&tasks, &logs, cfg.run.max_rereading_passes, cfg.run.tokenizer, cfg.cli.matcher);
    print!("{}", report.render_table());
    if let Some(path) = &args.out_report {
        write_json(path, &report)?;
    }
    if report.n_errors > 0 {
        warn!("{} of {} logged runs carry an error", report.n_errors, report.n_samples);
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct AdvantageArgs {
    /// Task JSONL holding the gold answers.
    #[arg(long, value_name = "PATH")]
    pub tasks: Option<PathBuf>,
    /// Trajectory JSONL; rollouts sharing a task id form one group.
    #[arg(long, value_name = "PATH")]
    pub traj: Option<PathBuf>,
    /// Outcome weight alpha in [0, 1].
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Epsilon added to the pass-count standard deviation.
    #[arg(long, default_value_t = DEFAULT_EPSILON_STD)]
    pub epsilon: f64,
    /// Outcome reward matcher: `exact` or `contains`.
    #[arg(long, default_value_t = Matcher::Exact)]
    pub matcher: Matcher,
    /// Output JSONL (standard output when absent).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

pub fn advantage(args: &AdvantageArgs) -> CliResult<()> {
    check_alpha(args.alpha).kind(Kind::Config)?;
    check_epsilon(args.epsilon).kind(Kind::Config)?;
    let tasks = load_tasks(required(&args.tasks, "--tasks")?)?;
    let logs = load_logs(required(&args.traj, "--traj")?)?;
    let paired = paired(&tasks, &logs)?;

    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, (Vec<TrajectoryLog>, &Task)> = BTreeMap::new();
    for (log, task) in logs.iter().zip(&paired) {
        let entry = groups.entry(log.task_id.as_str()).or_insert_with(|| {
            order.push(log.task_id.as_str());
            (Vec::new(), task)
        });
        entry.0.push(log.clone());
    }

    let mut tables = Vec::with_capacity(order.len());
    for id in order {
        let (trajectories, task) = groups.remove(id).expect("grouped above");
        let rewards = trajectories
            .iter()
            .map(|t| outcome_reward(&t.final_answer, &task.gold_answers, args.matcher))
            .collect();
        let group = RolloutGroup {
            task_id: id.to_string(),
            trajectories,
            rewards,
        };
        let table = overall_advantages(&group, &task.gold_answers, args.alpha, args.epsilon).map_err(|e: AdvantageError| CliError::new(Kind::Config, anyhow::Error::new(e).context(format!("group `{id}`"))))?;
        tables.push(table);
    }

    match &args.out {
        Some(path) => write_jsonl(path, &tables).kind(Kind::Runtime),
        None => {
            let mut out = io::stdout().lock();
            for t in &tables {
                serde_json::to_writer(&mut out, t).kind(Kind::Runtime)?;
                writeln!(out).kind(Kind::Runtime)?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Task JSONL the trajectories were produced from.
    #[arg(long, value_name = "PATH")]
    pub tasks: PathBuf,
    /// Trajectory JSONL to check.
    #[arg(long, value_name = "PATH")]
    pub traj: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Prints one validation report per log as JSONL. Fails when any log breaks
/// an invariant.
pub fn validate(args: &ValidateArgs) -> CliResult<()> {
    let cfg = resolve(&args.config)?;
    let tasks = load_tasks(&args.tasks)?;
    let logs = load_logs(&args.traj)?;
    let paired = paired(&tasks, &logs)?;
    let mut out = io::stdout().lock();
    let mut invalid = 0;
    for (log, task) in logs.iter().zip(&paired) {
        let report = validate_trajectory(log, &cfg.run, task);
        invalid += usize::from(!report.is_valid());
        serde_json::to_writer(&mut out, &report).kind(Kind::Runtime)?;
        writeln!(out).kind(Kind::Runtime)?;
    }
    if invalid > 0 {
        return Err(CliError::msg(Kind::Invalid, format!("{invalid} of {} trajectories are invalid", logs.len())));
    }
    Ok(())
}

//! Run configuration: a flat JSON file holding every `RunConfig` field plus
//! file paths and CLI-only settings, overridden by flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use memreread::eval::DEFAULT_ERROR_THRESHOLD;
use memreread::{BackendConfig, EvalOptions, HttpConfig, Matcher, RunConfig, SnapshotMode, Tokenizer};

/// Keys of the config file that are not `RunConfig` fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliSection {
    pub tasks: Option<PathBuf>,
    pub out_traj: Option<PathBuf>,
    pub out_report: Option<PathBuf>,
    pub prompt_dir: Option<PathBuf>,
    pub diagnostics_csv: Option<PathBuf>,
    pub parallel: usize,
    pub matcher: Matcher,
    pub error_threshold: f64,
    pub pc_sweep: Option<Vec<u32>>,
    pub log_level: Option<String>,
}

impl Default for CliSection {
    fn default() -> Self {
        Self {
            tasks: None,
            out_traj: None,
            out_report: None,
            prompt_dir: None,
            diagnostics_csv: None,
            parallel: 1,
            matcher: Matcher::default(),
            error_threshold: DEFAULT_ERROR_THRESHOLD,
            pc_sweep: None,
            log_level: None,
        }
    }
}

const CLI_KEYS: &[&str] = &[
    "tasks",
    "out_traj",
    "out_report",
    "prompt_dir",
    "diagnostics_csv",
    "parallel",
    "matcher",
    "error_threshold",
    "pc_sweep",
    "log_level",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CliConfig {
    pub run: RunConfig,
    pub cli: CliSection,
}

impl CliConfig {
    /// Parses a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("bad config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let Value::Object(all) = serde_json::from_str::<Value>(text)? else {
            bail!("config must be a JSON object");
        };
        let (cli, run): (Map<String, Value>, Map<String, Value>) =
            all.into_iter().partition(|(k, _)| CLI_KEYS.contains(&k.as_str()));
        Ok(Self {
            run: serde_json::from_value(Value::Object(run))?,
            cli: serde_json::from_value(Value::Object(cli))?,
        })
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        join(&mut self.cli.tasks);
        join(&mut self.cli.out_traj);
        join(&mut self.cli.out_report);
        join(&mut self.cli.prompt_dir);
        join(&mut self.cli.diagnostics_csv);
        if let BackendConfig::Scripted { script } = &mut self.run.backend {
            if script.is_relative() {
                *script = base.join(&*script);
            }
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            parallel: self.cli.parallel,
            matcher: self.cli.matcher,
            error_threshold: self.cli.error_threshold,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.run.validate()?;
        if self.cli.parallel == 0 {
            bail!("parallel must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.cli.error_threshold) {
            bail!("error_threshold must be in [0, 1], got {}", self.cli.error_threshold);
        }
        Ok(())
    }

    /// Flat JSON view with the API key masked, for logging.
    pub fn redacted_json(&self) -> String {
        let mut run = self.run.clone();
        if let BackendConfig::Http(h) = &mut run.backend {
            if h.api_key.is_some() {
                h.api_key = Some("***".into());
            }
        }
        let mut obj = match serde_json::to_value(&run) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        if let Ok(Value::Object(cli)) = serde_json::to_value(&self.cli) {
            obj.extend(cli);
        }
        Value::Object(obj).to_string()
    }
}

fn parse_snapshots(s: &str) -> Result<SnapshotMode, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("expected `full` or `latest_only`, got `{s}`"))
}

/// Flags shared by every command that takes a run configuration. Each one
/// overrides the matching config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Token counter: `whitespace` or `char4`.
    #[arg(long)]
    pub tokenizer: Option<Tokenizer>,
    /// Chunk size in tokens.
    #[arg(long, value_name = "N")]
    pub chunk_size_tokens: Option<usize>,
    /// Rereading budget p_c.
    #[arg(long, value_name = "N")]
    pub max_rereading_passes: Option<u32>,
    /// Response length cap per model call, in tokens.
    #[arg(long, value_name = "N")]
    pub max_response_tokens: Option<usize>,
    /// Outcome weight alpha of the overall advantage.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Epsilon added to the pass-count standard deviation.
    #[arg(long, value_name = "EPS")]
    pub epsilon_std: Option<f64>,
    /// Sampling temperature.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Memory snapshots to log: `full` or `latest_only`.
    #[arg(long, value_parser = parse_snapshots)]
    pub snapshots: Option<SnapshotMode>,
    /// Use the scripted backend with this rule file instead of HTTP.
    #[arg(long, value_name = "PATH")]
    pub script: Option<PathBuf>,
    /// Base URL of an OpenAI-compatible endpoint (else MEMREREAD_API_BASE).
    #[arg(long, value_name = "URL")]
    pub api_base: Option<String>,
    /// API key (else MEMREREAD_API_KEY).
    #[arg(long, value_name = "KEY")]
    pub api_key: Option<String>,
    /// Model name (else MEMREREAD_MODEL).
    #[arg(long)]
    pub model: Option<String>,
    /// Retries after a transient HTTP failure.
    #[arg(long, value_name = "N")]
    pub max_retries: Option<u32>,
    /// Initial retry delay in milliseconds, doubled per retry.
    #[arg(long, value_name = "MS")]
    pub backoff_ms: Option<u64>,
    /// Per-request timeout in seconds.
    #[arg(long, value_name = "SECS")]
    pub timeout_secs: Option<u64>,
    /// Directory with reading.txt, answering.txt, decomposing.txt and
    /// integrating.txt overriding the built-in prompts.
    #[arg(long, value_name = "DIR")]
    pub prompt_dir: Option<PathBuf>,
    /// Concurrent agent runs.
    #[arg(long, value_name = "N")]
    pub parallel: Option<usize>,
    /// Answer matcher: `exact` or `contains`.
    #[arg(long)]
    pub matcher: Option<Matcher>,
    /// Highest tolerated fraction of failed runs before exiting with 1.
    #[arg(long, value_name = "FRACTION")]
    pub error_threshold: Option<f64>,
}

impl ConfigArgs {
    /// Config file (if any) with every given flag applied on top.
    pub fn resolve(&self) -> anyhow::Result<CliConfig> {
        let mut cfg = match &self.config {
            Some(path) => CliConfig::load(path)?,
            None => CliConfig::default(),
        };
        let run = &mut cfg.run;
        set(&mut run.tokenizer, self.tokenizer);
        set(&mut run.chunk_size_tokens, self.chunk_size_tokens);
        set(&mut run.max_rereading_passes, self.max_rereading_passes);
        set(&mut run.max_response_tokens, self.max_response_tokens);
        set(&mut run.alpha, self.alpha);
        set(&mut run.epsilon_std, self.epsilon_std);
        set(&mut run.temperature, self.temperature);
        set(&mut run.snapshots, self.snapshots);
        if let Some(script) = &self.script {
            run.backend = BackendConfig::Scripted { script: script.clone() };
        }
        let http_flags = self.api_base.is_some()
            || self.api_key.is_some()
            || self.model.is_some()
            || self.max_retries.is_some()
            || self.backoff_ms.is_some()
            || self.timeout_secs.is_some();
        if http_flags {
            if self.script.is_some() {
                bail!("--script cannot be combined with HTTP backend flags");
            }
            if !matches!(run.backend, BackendConfig::Http(_)) {
                run.backend = BackendConfig::Http(HttpConfig::default());
            }
            if let BackendConfig::Http(h) = &mut run.backend {
                set_some(&mut h.api_base, &self.api_base);
                set_some(&mut h.api_key, &self.api_key);
                set_some(&mut h.model, &self.model);
                set(&mut h.max_retries, self.max_retries);
                set(&mut h.backoff_ms, self.backoff_ms);
                set(&mut h.timeout_secs, self.timeout_secs);
            }
        }
        let cli = &mut cfg.cli;
        set_some(&mut cli.prompt_dir, &self.prompt_dir);
        set(&mut cli.parallel, self.parallel);
        set(&mut cli.matcher, self.matcher);
        set(&mut cli.error_threshold, self.error_threshold);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_some<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

//! `memreread`: generate Global Reasoning datasets, evaluate the rereading
//! agent, summarize trajectories, compute group advantages and validate logs.
//!
//! Exit status is 0 on success, 1 when runs failed beyond the error threshold
//! (or logs are invalid, or execution broke), and 2 on configuration errors.
//! Errors go to standard error as `error[CODE]: message`.

mod commands;
mod config;
mod error;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;

use commands::{AdvantageArgs, GenerateArgs, ReportArgs, RunArgs, ValidateArgs};
use error::{CliError, CliResult, Kind, WithKind};

#[derive(Debug, Parser)]
#[command(name = "memreread", version, about = "Long-context agent with adaptive rereading", propagate_version = true)]
struct Cli {
    /// Log level: off, error, warn, info, debug or trace. Overrides the
    /// config file's `log_level` and RUST_LOG.
    #[arg(long, global = true, value_name = "LEVEL")]
    log_level: Option<LevelFilter>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Global Reasoning dataset.
    Generate(GenerateArgs),
    /// Run the agent over a task file and report metrics.
    Run(RunArgs),
    /// Summarize an existing trajectory file.
    Report(ReportArgs),
    /// Compute group advantages from rollouts grouped by task id.
    Advantage(AdvantageArgs),
    /// Check trajectory logs against their schema invariants.
    Validate(ValidateArgs),
}

impl Command {
    fn config_path(&self) -> Option<&Path> {
        match self {
            Command::Run(a) => a.config.config.as_deref(),
            Command::Report(a) => a.config.config.as_deref(),
            Command::Validate(a) => a.config.config.as_deref(),
            Command::Generate(_) | Command::Advantage(_) => None,
        }
    }
}

/// `log_level` from the config file, if it has a readable one. Any problem
/// with the file is reported later by the command itself.
fn config_log_level(path: &Path) -> Option<LevelFilter> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get("log_level")?.as_str()?.parse().ok()
}

fn init_logging(cli: &Cli) -> CliResult<()> {
    let level = cli
        .log_level
        .or_else(|| cli.command.config_path().and_then(config_log_level));
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"));
    if let Some(level) = level {
        builder.filter_level(level);
    }
    builder.try_init().kind(Kind::Runtime)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    init_logging(cli)?;
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Run(a) => commands::run(a),
        Command::Report(a) => commands::report(a),
        Command::Advantage(a) => commands::advantage(a),
        Command::Validate(a) => commands::validate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let message = rendered.trim_start_matches("error: ").trim_end();
            eprintln!("{}", CliError::msg(Kind::Usage, message.to_string()));
            return Kind::Usage.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.kind.exit_code()
        }
    }
}

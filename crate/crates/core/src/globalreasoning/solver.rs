//! Text-scanning oracle for generated documents.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::TaskType;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("cannot find the {0} in the question")]
    Question(&'static str),
    #[error("no direct fact resolves `{0}`")]
    NoDirectFact(String),
    #[error("no log line found for alias `{0}`")]
    NoLogLines(String),
}

static STAT_QUESTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"registered in the facility in ([^\s?]+)\?").unwrap());
static STAT_DIRECT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"The facility formally designated as (\S+) is physically located in ([^\s,]+), and a '([^']+)' is the official designation for a magic anomaly\.",
    )
    .unwrap()
});
static STAT_FACT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"The facility in (\S+) registered a ([^.]+?) of type ([0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12})\.").unwrap()
});
static VAR_QUESTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"final configuration value of '([^']+)'").unwrap());
static VAR_DIRECT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"the internal alias '([^']+)' represents the '([^']+)', and the '([^']+)' structurally signifies").unwrap()
});
static VAR_FACT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\[System Log Seq (\d+)\] The ([^'\]]+) '([^']+)' is (?:initially set|updated) to '(\d+)'\.").unwrap()
});

/// Answers a generated question by pattern-matching the planted statements.
pub fn solve(document: &str, question: &str, task_type: TaskType) -> Result<String, SolveError> {
    match task_type {
        TaskType::Statistics => solve_statistics(document, question),
        TaskType::VariableTracking => solve_variable(document, question),
    }
}

fn solve_statistics(document: &str, question: &str) -> Result<String, SolveError> {
    let city = &STAT_QUESTION.captures(question).ok_or(SolveError::Question("city"))?[1];
    let direct = STAT_DIRECT
        .captures_iter(document)
        .find(|c| &c[2] == city)
        .ok_or_else(|| SolveError::NoDirectFact(city.to_string()))?;
    let (alias, event) = (&direct[1], &direct[3]);
    let types: HashSet<String> = STAT_FACT
        .captures_iter(document)
        .filter(|c| &c[1] == alias && &c[2] == event)
        .map(|c| c[3].to_lowercase())
        .collect();
    Ok(types.len().to_string())
}

fn solve_variable(document: &str, question: &str) -> Result<String, SolveError> {
    let variable = &VAR_QUESTION.captures(question).ok_or(SolveError::Question("variable"))?[1];
    let direct = VAR_DIRECT
        .captures_iter(document)
        .find(|c| &c[2] == variable)
        .ok_or_else(|| SolveError::NoDirectFact(variable.to_string()))?;
    let (alias, descriptor) = (&direct[1], &direct[3]);
    VAR_FACT
        .captures_iter(document)
        .filter(|c| &c[3] == alias && &c[2] == descriptor)
        .filter_map(|c| Some((c[1].parse::<u64>().ok()?, c[4].to_string())))
        .max_by_key(|(seq, _)| *seq)
        .map(|(_, value)| value)
        .ok_or_else(|| SolveError::NoLogLines(alias.to_string()))
}

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{ALIASES, CITIES, DESCRIPTORS, EVENTS, VARIABLES};
use super::{GenError, GenSpec, TaskType, MAX_FACTS, MIN_FACTS};

/// The statements planted in one sample and its gold answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSet {
    pub task_type: TaskType,
    pub question: String,
    pub direct_fact: String,
    pub indirect_facts: Vec<String>,
    pub distractors: Vec<String>,
    /// City (statistics) or configuration variable (variable tracking).
    pub true_entity: String,
    pub alias: String,
    pub distractor_alias: String,
    /// Event designation (statistics) or parameter descriptor (variable
    /// tracking).
    pub event_alias: String,
    pub answer: String,
}

impl FactSet {
    pub fn n_facts(&self) -> usize {
        self.indirect_facts.len()
    }
}

pub fn statistics_question(city: &str) -> String {
    format!("How many distinct magic anomalies were registered in the facility in {city}? Please use Arabic numerals for your answer.")
}

pub fn variable_question(variable: &str) -> String {
    format!(
        "According to the system logs, what is the final configuration value of '{variable}' \
         (indicated by the highest log sequence number)? Please use Arabic numerals for your answer."
    )
}

pub fn registration_fact(alias: &str, event: &str, uuid: &str) -> String {
    format!("The facility in {alias} registered a {event} of type {uuid}.")
}

pub fn location_fact(alias: &str, city: &str, event: &str, distractor_alias: &str) -> String {
    format!(
        "Note for all personnel: The facility formally designated as {alias} is physically located in {city}, \
         and a '{event}' is the official designation for a magic anomaly. {distractor_alias} is not in {city}."
    )
}

pub fn log_fact(seq: usize, descriptor: &str, alias: &str, value: u32) -> String {
    let verb = if seq == 0 { "is initially set to" } else { "is updated to" };
    format!("[System Log Seq {seq:03}] The {descriptor} '{alias}' {verb} '{value}'.")
}

pub fn mapping_fact(alias: &str, variable: &str, descriptor: &str) -> String {
    format!(
        "System architecture documentation confirms that the internal alias '{alias}' represents the \
         '{variable}', and the '{descriptor}' structurally signifies the configuration variable."
    )
}

fn random_uuid<R: Rng + ?Sized>(rng: &mut R) -> String {
    uuid::Builder::from_random_bytes(rng.random()).into_uuid().to_string()
}

fn pick<'v, R: Rng + ?Sized>(pool: &[&'v str], rng: &mut R) -> &'v str {
    pool.choose(rng).expect("vocabulary pools are non-empty")
}

/// Draws the fact count, entities and statements for one sample.
pub fn build_facts<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Result<FactSet, GenError> {
    let n = match spec.n_facts {
        Some(n) if (MIN_FACTS..=MAX_FACTS).contains(&n) => n,
        Some(n) => return Err(GenError::FactCount(n)),
        None => rng.random_range(MIN_FACTS..=MAX_FACTS),
    };
    let n_distractors = spec.n_distractors.unwrap_or(n);
    let mut aliases = ALIASES.to_vec();
    aliases.shuffle(rng);
    let (alias, distractor_alias) = (aliases[0], aliases[1]);

    let facts = match spec.task_type {
        TaskType::Statistics => {
            let city = pick(CITIES, rng);
            let event = pick(EVENTS, rng);
            // Distinct by construction: 122 random bits per id.
            let indirect_facts = (0..n)
                .map(|_| registration_fact(alias, event, &random_uuid(rng)))
                .collect();
            let distractors = (0..n_distractors)
                .map(|_| registration_fact(distractor_alias, event, &random_uuid(rng)))
                .collect();
            FactSet {
                task_type: spec.task_type,
                question: statistics_question(city),
                direct_fact: location_fact(alias, city, event, distractor_alias),
                indirect_facts,
                distractors,
                true_entity: city.to_string(),
                alias: alias.to_string(),
                distractor_alias: distractor_alias.to_string(),
                event_alias: event.to_string(),
                answer: n.to_string(),
            }
        }
        TaskType::VariableTracking => {
            let variable = pick(VARIABLES, rng);
            let descriptor = pick(DESCRIPTORS, rng);
            let mut seqs: Vec<usize> = (0..n).collect();
            seqs.shuffle(rng);
            let values: Vec<u32> = (0..n).map(|_| rng.random_range(1000..=9999)).collect();
            let answer = values[seqs.iter().position(|&s| s == n - 1).expect("permutation holds n - 1")];
            let indirect_facts = seqs
                .iter()
                .zip(&values)
                .map(|(&seq, &value)| log_fact(seq, descriptor, alias, value))
                .collect();
            let mut decoy_seqs: Vec<usize> = (0..n_distractors).collect();
            decoy_seqs.shuffle(rng);
            let distractors = decoy_seqs
                .into_iter()
                .map(|seq| log_fact(seq, descriptor, distractor_alias, rng.random_range(1000..=9999)))
                .collect();
            FactSet {
                task_type: spec.task_type,
                question: variable_question(variable),
                direct_fact: mapping_fact(alias, variable, descriptor),
                indirect_facts,
                distractors,
                true_entity: variable.to_string(),
                alias: alias.to_string(),
                distractor_alias: distractor_alias.to_string(),
                event_alias: descriptor.to_string(),
                answer: answer.to_string(),
            }
        }
    };
    Ok(facts)
}

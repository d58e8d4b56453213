//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use memreread::backend::{CallTag, RuleMatch, ScriptedBackend, ScriptedRule};
use memreread::Task;

pub const CORPUS: &str = include_str!("../../core/fixtures/corpus.txt");

/// A document of `words` whitespace tokens drawn from the fixture corpus.
pub fn document(words: usize) -> String {
    CORPUS.split_whitespace().cycle().take(words).collect::<Vec<_>>().join(" ")
}

pub fn task(words: usize) -> Task {
    Task {
        id: format!("bench-{words}"),
        question: "Where did the herds go?".into(),
        document: document(words),
        gold_answers: vec!["uphill".into()],
        meta: BTreeMap::new(),
    }
}

/// Backend that asks one follow-up question per run and then stops.
pub fn backend() -> ScriptedBackend {
    ScriptedBackend::new(vec![
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Answer), "\\boxed{uphill}"),
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Read), "The herds moved uphill."),
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Integrate), "Merged: herds moved uphill."),
        ScriptedRule::new(RuleMatch::PromptContains("Merged:".into()), "Sufficient."),
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Decompose), "<query>Why uphill?</query>"),
    ])
    .expect("static rules compile")
}

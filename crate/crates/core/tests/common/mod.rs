//! Test-side oracles and fixtures, written independently of the library code
//! they check.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use memreread::backend::{CallTag, RuleMatch, ScriptedBackend, ScriptedRule};
use memreread::{MemoryState, Task, TrajectoryLog};

/// Direct evaluation of the outcome-advantage formula: no shifting, no
/// shared helpers.
pub fn outcome_oracle(rewards: &[f64], passes: &[u32], eps: f64) -> Vec<f64> {
    let n = rewards.len();
    let g = n as f64;
    let p: Vec<f64> = passes.iter().map(|&x| x as f64).collect();
    let total: f64 = rewards.iter().sum();
    if total == 0.0 || total == g {
        let mu = p.iter().sum::<f64>() / g;
        let sigma = (p.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / g).sqrt();
        let sign = if total == g { -1.0 } else { 1.0 };
        p.iter()
            .map(|x| if sigma + eps == 0.0 { 0.0 } else { sign * (x - mu) / (sigma + eps) })
            .collect()
    } else {
        (0..n)
            .map(|i| {
                let denom: f64 = (0..n).filter(|&k| rewards[k] == rewards[i]).map(|k| (-p[k]).exp()).sum();
                (-1f64).powi(rewards[i] as i32 + 1) * (-p[i]).exp() / denom
            })
            .collect()
    }
}

fn tokens(s: &str) -> HashSet<String> {
    let s = s.replace("<confirmed>", "").replace("</confirmed>", "");
    let kept: String = s
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { '\u{0}' })
        .filter(|c| *c != '\u{0}')
        .collect();
    kept.to_lowercase().split_whitespace().map(String::from).collect()
}

pub fn recall_oracle(memory: &str, answer: &str) -> f64 {
    let a = tokens(answer);
    if a.is_empty() {
        return 0.0;
    }
    let m = tokens(memory);
    a.iter().filter(|t| m.contains(*t)).count() as f64 / a.len() as f64
}

/// `[pass][chunk]` state rewards computed straight from the definition.
pub fn state_reward_oracle(log: &TrajectoryLog, gold: &[String]) -> Vec<Vec<f64>> {
    let passes = log.rereading_passes as usize + 1;
    let mut grid: Vec<Vec<&MemoryState>> = vec![Vec::new(); passes];
    for m in &log.memories {
        grid[m.pass_index as usize].push(m);
    }
    let best = |text: &str| gold.iter().map(|y| recall_oracle(text, y)).fold(0.0, f64::max);
    grid.iter()
        .map(|row| {
            (0..row.len())
                .map(|t| best(&row[t].text) - if t == 0 { 0.0 } else { best(&row[t - 1].text) })
                .collect()
        })
        .collect()
}

/// Document of exactly `t` chunks of `words` whitespace tokens each.
pub fn task_with_chunks(t: usize, words: usize) -> Task {
    let document = (0..t * words).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
    Task {
        id: format!("t{t}"),
        question: "What is the answer?".into(),
        document,
        gold_answers: vec!["ans".into()],
        meta: BTreeMap::new(),
    }
}

/// Scripted model whose decompose step emits the given queries once each, in
/// order, then reports sufficiency. With `repeat_last` the last query is
/// emitted forever instead.
pub fn scripted(queries: &[&str], repeat_last: bool) -> ScriptedBackend {
    let mut rules: Vec<ScriptedRule> = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        let rule = ScriptedRule::new(RuleMatch::TagEquals(CallTag::Decompose), format!("I still need: <query>{q}</query>"));
        rules.push(if repeat_last && i + 1 == queries.len() { rule } else { rule.once() });
    }
    rules.extend([
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Decompose), "The memory is sufficient."),
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Read), "MEM"),
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Answer), "Reasoning. \\boxed{ans}"),
        ScriptedRule::new(RuleMatch::TagEquals(CallTag::Integrate), "ROOT"),
    ]);
    ScriptedBackend::new(rules).unwrap()
}

/// Call sequence implied by the workflow for `t` chunks, `p` completed
/// rereadings and budget `p_c`.
pub fn expected_trace(t: usize, p: u32, p_c: u32) -> Vec<CallTag> {
    let mut out = vec![CallTag::Read; t];
    for _ in 0..p {
        out.push(CallTag::Decompose);
        out.extend(std::iter::repeat(CallTag::Read).take(t));
        out.push(CallTag::Answer);
        out.push(CallTag::Integrate);
    }
    if p < p_c {
        out.push(CallTag::Decompose);
    }
    out.push(CallTag::Answer);
    out
}

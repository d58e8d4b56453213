//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails.
//!
//! `cargo test -p memreread-core --test acceptance`

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use memreread::agent::Agent;
use memreread::backend::{CallTag, HttpBackend, HttpConfig};
use memreread::eval::{build_report, eta_from_reports, EvalReport};
use memreread::globalreasoning::{generate_sample, solve, Corpus, GenSpec, TaskType, LENGTH_GRID};
use memreread::prompt::{PromptArgs, PromptKind};
use memreread::{
    chunk_document, expected_llm_calls, outcome_advantages, overall_advantages, parse_boxed_answer, parse_query,
    validate_trajectory, Matcher, MemoryState, RolloutGroup, RunConfig, SubQA, Task, Tokenizer, TrajectoryLog,
};

use common::{expected_trace, outcome_oracle, scripted, state_reward_oracle, task_with_chunks};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn random_group(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u32>) {
    let g = rng.random_range(2..=8);
    let rewards = (0..g).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let passes = (0..g).map(|_| rng.random_range(0..=4)).collect();
    (rewards, passes)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut hetero, mut homo) = (0, 0);
    for i in 0..10_000 {
        let (rewards, passes) = random_group(&mut rng);
        let eps = if i % 2 == 0 { 0.0 } else { 1e-6 };
        let got = outcome_advantages(&rewards, &passes, eps).map_err(|e| e.to_string())?.values;
        let want = outcome_oracle(&rewards, &passes, eps);
        for (a, b) in got.iter().zip(&want) {
            ensure((a - b).abs() <= 1e-9, || format!("group {i}: {got:?} vs oracle {want:?}"))?;
        }
        let right: usize = rewards.iter().filter(|r| **r == 1.0).count();
        if right == 0 || right == rewards.len() {
            homo += 1;
            let mean = got.iter().sum::<f64>() / got.len() as f64;
            ensure(mean.abs() <= 1e-6, || format!("group {i}: homogeneous mean {mean}"))?;
        } else {
            hetero += 1;
            let sum_of = |class: f64| -> f64 { got.iter().zip(&rewards).filter(|(_, r)| **r == class).map(|(a, _)| a).sum() };
            ensure((sum_of(1.0) - 1.0).abs() <= 1e-12, || format!("group {i}: correct sum {}", sum_of(1.0)))?;
            ensure((sum_of(0.0) + 1.0).abs() <= 1e-12, || format!("group {i}: incorrect sum {}", sum_of(0.0)))?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!("10000 groups ({hetero} mixed, {homo} homogeneous) in {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    type Case<'a> = (&'a [f64], &'a [u32], f64, &'a [f64]);
    let cases: [Case; 3] = [
        (&[1.0; 4], &[0, 1, 2, 3], 0.0, &[1.3416, 0.4472, -0.4472, -1.3416]),
        (&[0.0, 0.0], &[1, 3], 0.0, &[-1.0, 1.0]),
        (&[1.0, 1.0, 0.0], &[0, 2, 1], 1e-6, &[0.8808, 0.1192, -1.0]),
    ];
    for (rewards, passes, eps, want) in cases {
        let got = outcome_advantages(rewards, passes, eps).map_err(|e| e.to_string())?.values;
        ensure(got.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-3), || format!("{got:?} vs {want:?}"))?;
    }
    Ok("3 fixtures within 1e-3".into())
}

const WORDS: &[&str] = &["red", "fox", "blue", "cat", "in", "1997", "<confirmed>fox</confirmed>", "Paris,", "river"];

fn random_log(rng: &mut ChaCha8Rng, id: &str, chunks: usize, passes: u32) -> TrajectoryLog {
    let mut memories = Vec::new();
    for p in 0..=passes {
        for t in 0..chunks {
            let n = rng.random_range(0..6);
            let text = (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ");
            memories.push(MemoryState {
                text,
                pass_index: p,
                chunk_index: t,
            });
        }
    }
    TrajectoryLog {
        task_id: id.into(),
        memories,
        sub_qas: (1..=passes)
            .map(|p| SubQA {
                sub_question: "q".into(),
                sub_answer: "a".into(),
                pass_index: p,
            })
            .collect(),
        rereading_passes: passes,
        ..TrajectoryLog::default()
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut zeroed = 0usize;
    for i in 0..1000 {
        let g = rng.random_range(2..=8);
        let chunks = rng.random_range(1..=5);
        let trajectories: Vec<TrajectoryLog> = (0..g)
            .map(|_| {
                let passes = rng.random_range(0..=3);
                random_log(&mut rng, "task", chunks, passes)
            })
            .collect();
        let rewards = (0..g).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let gold = vec!["red fox".to_string(), "Paris 1997".to_string()];
        let alpha: f64 = rng.random_range(0.0..=1.0);
        let group = RolloutGroup {
            task_id: "task".into(),
            trajectories,
            rewards,
        };
        let table = overall_advantages(&group, &gold, alpha, 1e-6).map_err(|e| e.to_string())?;

        let oracle_rewards: Vec<Vec<Vec<f64>>> = group.trajectories.iter().map(|t| state_reward_oracle(t, &gold)).collect();
        let common = group.trajectories.iter().map(|t| t.rereading_passes).min().unwrap() as usize;
        for (k, grid) in table.overall.iter().enumerate() {
            let out = table.outcome[k];
            for (p, row) in grid.iter().enumerate() {
                for (t, &v) in row.iter().enumerate() {
                    if p <= common {
                        let mean = oracle_rewards.iter().map(|r| r[p][t]).sum::<f64>() / g as f64;
                        let state = oracle_rewards[k][p][t] - mean;
                        ensure((table.state[k][p][t] - state).abs() <= 1e-12, || {
                            format!("group {i}: state[{k}][{p}][{t}] = {} vs oracle {state}", table.state[k][p][t])
                        })?;
                        let want = alpha * out + (1.0 - alpha) * table.state[k][p][t];
                        ensure((v - want).abs() <= 1e-12, || format!("group {i}: overall[{k}][{p}][{t}] = {v} vs {want}"))?;
                    } else {
                        zeroed += 1;
                        ensure(table.state[k][p][t] == 0.0 && v == alpha * out, || {
                            format!("group {i}: position ({p},{t}) beyond common length holds {v}")
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("1000 groups, {zeroed} beyond-common positions exactly alpha*outcome"))
}

fn corpus() -> Result<Corpus, String> {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus.txt")).map_err(|e| e.to_string())?;
    Corpus::new(&text, Tokenizer::Whitespace).map_err(|e| e.to_string())
}

fn scan_fact_count(doc: &str, task_type: TaskType, alias: &str) -> usize {
    match task_type {
        TaskType::Statistics => doc.matches(&format!("The facility in {alias} registered a ")).count(),
        TaskType::VariableTracking => doc.matches(&format!(" '{alias}' is ")).count(),
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let corpus = corpus()?;
    let grid = &LENGTH_GRID[..6];
    let mut checked = 0;
    for task_type in TaskType::ALL {
        let failures: Vec<String> = (0u64..1000)
            .into_par_iter()
            .filter_map(|seed| {
                let target = grid[ChaCha8Rng::seed_from_u64(seed).random_range(0..grid.len())];
                let spec = GenSpec::new(task_type, target, seed);
                let s = match generate_sample(&spec, 0, &corpus) {
                    Ok(s) => s,
                    Err(e) => return Some(format!("{task_type} seed {seed}: {e}")),
                };
                let doc = &s.task.document;
                let answer = solve(doc, &s.task.question, task_type).map_err(|e| e.to_string());
                let tokens = Tokenizer::Whitespace.count(doc) as f64;
                let n = s.meta.n_facts;
                let problems = [
                    (answer.as_deref() != Ok(s.task.gold_answers[0].as_str()))
                        .then(|| format!("oracle {answer:?} vs gold {}", s.task.gold_answers[0])),
                    (!(0.5..=0.9).contains(&s.meta.placement.direct_position))
                        .then(|| format!("direct position {}", s.meta.placement.direct_position)),
                    (!(3..=10).contains(&n)).then(|| format!("fact count {n}")),
                    (scan_fact_count(doc, task_type, &s.meta.facts.alias) != n).then(|| "scanned fact count differs".to_string()),
                    (s.meta.facts.alias == s.meta.facts.distractor_alias).then(|| "distractor alias equals alias".to_string()),
                    ((tokens - target as f64).abs() / target as f64 > 0.02).then(|| format!("{tokens} tokens for target {target}")),
                ];
                let bad: Vec<String> = problems.into_iter().flatten().collect();
                (!bad.is_empty()).then(|| format!("{task_type} seed {seed}: {}", bad.join("; ")))
            })
            .collect();
        ensure(failures.is_empty(), || format!("{} failures, first: {}", failures.len(), failures[0]))?;
        checked += 1000;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("{checked} samples agree with the oracle in {elapsed:.2?}"))
}

const FILLER: &str = "The workshop opened early and the floor was swept before anyone arrived.";

fn statistics_example() -> (String, String) {
    let lines = [
        "The facility in Sector-X registered a Category-B logical paradox of type f324d118-ab7c-416f-b3e9-c0404935e14e.",
        FILLER,
        "The facility in Omega-Protocol registered a Category-B logical paradox of type b27e2d6e-04b6-4727-b81b-9369da5ae7ea.",
        FILLER,
        "The facility in Sector-X registered a Category-B logical paradox of type 1327f6d7-bbb5-4c1f-af49-a78bad83b9d3.",
        FILLER,
        "The facility in Omega-Protocol registered a Category-B logical paradox of type d9769394-ad5a-4403-9fdb-d7c1348f2f53.",
        FILLER,
        "The facility in Sector-X registered a Category-B logical paradox of type 1aca0b49-b0a7-4f03-950b-0a5b2aecc0be.",
        FILLER,
        "The facility in Omega-Protocol registered a Category-B logical paradox of type d9769394-ad5a-4403-9fdb-d7c134234523.",
        FILLER,
        "Note for all personnel: The facility formally designated as Sector-X is physically located in City_A, and a 'Category-B logical paradox' is the official designation for a magic anomaly.  Omega-Proto is not in City_A.",
        FILLER,
        "The facility in Omega-Protocol registered a Category-B logical paradox of type 1644c6b2-2252-44e7-bdca-33265229bc3a.",
    ];
    let question = "How many distinct magic anomalies were registered in the facility in City_A?";
    (lines.join(" "), question.to_string())
}

fn variable_tracking_example() -> (String, String) {
    // Lines elided in the reference example are filled with
    // invented values.
    let lines = [
        "[System Log Seq 000] The thread pool minimum size 'Echo-Base' is initially set to '9673'.",
        FILLER,
        "[System Log Seq 003] The thread pool minimum size 'Echo-Base' is updated to '2718'.",
        "[System Log Seq 003] The thread pool minimum size 'Node-Zero' is updated to '6242'.",
        "[System Log Seq 005] The thread pool minimum size 'Echo-Base' is updated to '5666'.",
        "[System Log Seq 000] The thread pool minimum size 'Node-Zero' is initially set to '4259'.",
        FILLER,
        "[System Log Seq 008] The thread pool minimum size 'Echo-Base' is updated to '9115'.",
        "[System Log Seq 001] The thread pool minimum size 'Node-Zero' is updated to '5387'.",
        "[System Log Seq 006] The thread pool minimum size 'Echo-Base' is updated to '1107'.",
        "[System Log Seq 004] The thread pool minimum size 'Echo-Base' is updated to '3141'.",
        "[System Log Seq 004] The thread pool minimum size 'Node-Zero' is updated to '8654'.",
        FILLER,
        "System architecture documentation confirms that the internal alias 'Echo-Base' represents the 'log_level', and the 'thread pool minimum size' structurally signifies the configuration variable.",
        "[System Log Seq 002] The thread pool minimum size 'Node-Zero' is updated to '7777'.",
        "[System Log Seq 009] The thread pool minimum size 'Echo-Base' is updated to '1434'.",
        FILLER,
        "[System Log Seq 007] The thread pool minimum size 'Echo-Base' is updated to '2024'.",
    ];
    let question = "According to the system logs, what is the final configuration value of 'log_level' (indicated by the highest log sequence number)?";
    (lines.join(" "), question.to_string())
}

fn criterion_5() -> Outcome {
    let (doc, q) = statistics_example();
    let a1 = solve(&doc, &q, TaskType::Statistics).map_err(|e| e.to_string())?;
    let (doc, q) = variable_tracking_example();
    let a2 = solve(&doc, &q, TaskType::VariableTracking).map_err(|e| e.to_string())?;
    ensure(a1 == "3" && a2 == "1434", || format!("answers {a1:?}, {a2:?}"))?;
    Ok("sample 1 -> 3, sample 2 -> 1434".into())
}

fn config(p_c: u32) -> RunConfig {
    RunConfig {
        chunk_size_tokens: 5,
        max_rereading_passes: p_c,
        tokenizer: Tokenizer::Whitespace,
        ..RunConfig::default()
    }
}

fn criterion_6() -> Outcome {
    let scenarios: [(&str, &[&str], bool); 3] = [
        ("never-query", &[], false),
        ("always-query", &["Where is the facility?"], true),
        ("query-twice", &["Where is the facility?", "Which events count?"], false),
    ];
    let mut runs = 0;
    for (name, queries, repeat) in scenarios {
        for t in [1usize, 3, 8] {
            for p_c in [0u32, 1, 3] {
                let backend = scripted(queries, repeat);
                let cfg = config(p_c);
                let task = task_with_chunks(t, 5);
                let agent = Agent::new(&backend, &cfg);
                ensure(agent.chunks(&task).len() == t, || format!("fixture does not chunk into {t}"))?;
                let (log, stats) = agent.run_with_stats(&task).map_err(|e| e.to_string())?;
                let p = match name {
                    "never-query" => 0,
                    "always-query" => p_c,
                    _ => p_c.min(2),
                };
                let d = if p < p_c { p + 1 } else { p };
                let calls = t as u64 * (u64::from(p) + 1) + u64::from(d) + 2 * u64::from(p) + 1;
                let ctx = || format!("{name}, T={t}, p_c={p_c}");
                ensure(stats.trace == expected_trace(t, p, p_c), || format!("{}: call sequence {:?}", ctx(), stats.trace))?;
                ensure(log.llm_calls == calls && expected_llm_calls(t, p, d) == calls, || {
                    format!("{}: {} calls, closed form {calls}", ctx(), log.llm_calls)
                })?;
                let want_q: Vec<&str> = (0..p as usize).map(|i| queries[i.min(queries.len() - 1)]).collect();
                let got_q: Vec<&str> = log.sub_qas.iter().map(|qa| qa.sub_question.as_str()).collect();
                ensure(got_q == want_q, || format!("{}: history {got_q:?}", ctx()))?;
                ensure(log.sub_qas.iter().enumerate().all(|(i, qa)| qa.pass_index == i as u32 + 1), || {
                    format!("{}: pass indices", ctx())
                })?;
                if p_c == 0 {
                    ensure(log.llm_calls == t as u64 + 1, || format!("{}: baseline calls {}", ctx(), log.llm_calls))?;
                }
                let report = validate_trajectory(&log, &cfg, &task);
                ensure(report.is_valid(), || format!("{}: {:?}", ctx(), report.violations))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} scripted runs match the closed form"))
}

fn criterion_7() -> Outcome {
    let p_c = 3;
    let ts = [1usize, 2, 4, 8, 16, 32];
    let mut points = Vec::new();
    let mut peaks = Vec::new();
    for t in ts {
        let backend = scripted(&["Which part is missing?"], true);
        let cfg = config(p_c);
        let (log, stats) = Agent::new(&backend, &cfg)
            .run_with_stats(&task_with_chunks(t, 5))
            .map_err(|e| e.to_string())?;
        let closed = expected_llm_calls(t, log.rereading_passes, p_c);
        ensure(log.llm_calls == closed, || format!("T={t}: {} calls vs {closed}", log.llm_calls))?;
        ensure(stats.calls(CallTag::Read) == t * 4, || format!("T={t}: read calls"))?;
        points.push((t as f64, log.llm_calls as f64));
        peaks.push(stats.peak_live_memories);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let intercept = my - slope * mx;
    let residual: f64 = points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum();
    ensure(residual < 1e-9, || format!("least-squares residual {residual}"))?;
    ensure((slope - 4.0).abs() < 1e-9 && (intercept - 10.0).abs() < 1e-9, || {
        format!("fit calls = {slope} T + {intercept}, expected 4 T + 10")
    })?;
    ensure(peaks.iter().all(|&p| p <= 2), || format!("peak live memories {peaks:?}"))?;
    ensure(peaks.windows(2).all(|w| w[0] == w[1]), || format!("peak live memories vary with T: {peaks:?}"))?;
    Ok(format!("calls = {slope} T + {intercept}, residual {residual}, peak live memories {}", peaks[0]))
}

fn document_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<String>(),
        "([a-zA-Zé漢🦀]{1,8}[ .!?\n\t]{1,3}){0,80}",
        "[\\PC\n ]{0,200}",
    ]
}

fn criterion_8() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (document_strategy(), 1usize..40, prop_oneof![Just(Tokenizer::Whitespace), Just(Tokenizer::Char4)]);
    runner
        .run(&strategy, |(doc, budget, tok)| {
            let chunks = chunk_document(&doc, budget, tok);
            let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
            prop_assert_eq!(&joined, &doc);
            for (i, c) in chunks.iter().enumerate() {
                prop_assert_eq!(c.index, i);
                prop_assert!(c.token_count <= budget);
                prop_assert_eq!(c.token_count, tok.count(&c.text));
                prop_assert!(!c.text.is_empty());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("10000 fuzzed documents round-trip within budget".into())
}

fn criterion_9() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts");
    let history = [SubQA {
        sub_question: "SQ-1".into(),
        sub_answer: "SA-1".into(),
        pass_index: 1,
    }];
    for kind in PromptKind::ALL {
        let committed = fs::read_to_string(dir.join(format!("{}.txt", kind.name()))).map_err(|e| e.to_string())?;
        ensure(committed == kind.default_body(), || format!("{kind}: built-in body differs from committed file"))?;
        let args = PromptArgs::new("QUESTION-X", "MEMORY-X")
            .chunk("CHUNK-X")
            .qa_history(&history)
            .subqa("SUBQ-X", "SUBA-X");
        let rendered = memreread::prompt::render(kind, &args).map_err(|e| e.to_string())?;
        let expected = committed
            .replace("{question}", "QUESTION-X")
            .replace("{memory}", "MEMORY-X")
            .replace("{chunk}", "CHUNK-X")
            .replace("{qa_history}", "1. Q: SQ-1 A: SA-1")
            .replace("{subquestion}", "SUBQ-X")
            .replace("{subanswer}", "SUBA-X");
        ensure(rendered == expected, || format!("{kind}: rendered text differs from substituted template"))?;
    }

    let mut runner = TestRunner::new(Config {
        cases: 2_000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&any::<String>(), |s| {
            if !s.contains("<query>") {
                prop_assert_eq!(parse_query(&s), None);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let tagless = "[^<>{}\\\\]{0,40}";
    runner
        .run(&(tagless, "[^<>{}\\\\]*[^<>{}\\\\\\s][^<>{}\\\\]*", tagless), |(pre, body, post)| {
            let out = format!("{pre}<query>{body}</query>{post}");
            prop_assert_eq!(parse_query(&out), Some(body.trim().to_string()));
            let boxed = format!("{pre}\\boxed{{{body}}}{post}");
            prop_assert_eq!(parse_boxed_answer(&boxed), body.trim().to_string());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    runner
        .run(&"[^\\\\]{0,60}", |s| {
            prop_assert_eq!(parse_boxed_answer(&s), s.trim().to_string());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("4 templates byte-identical, parser fuzz properties hold".into())
}

/// Reference per-length accuracies (8K to 1M) at p_c = 0..=4.
const REFERENCE_PER_LENGTH: [[f64; 8]; 5] = [
    [53.1, 54.3, 50.8, 39.8, 40.6, 41.4, 38.3, 46.3],
    [52.9, 46.3, 52.9, 43.8, 43.0, 45.5, 41.4, 47.5],
    [52.7, 45.6, 53.9, 43.0, 38.1, 75.0, 46.5, 54.7],
    [59.4, 57.8, 51.6, 46.9, 49.2, 53.1, 51.6, 54.8],
    [55.5, 63.3, 62.5, 45.3, 46.9, 51.6, 52.3, 55.5],
];
const REFERENCE_AVG: [f64; 5] = [45.6, 46.7, 51.2, 53.0, 54.1];
const REFERENCE_ETA: [f64; 4] = [1.1, 2.8, 2.5, 2.1];

/// Reports built through the harness from synthetic logs whose per-length
/// correct fractions equal the given percentages.
fn synthetic_report(accuracies: &[f64], p_c: u32) -> EvalReport {
    let mut tasks = Vec::new();
    let mut logs = Vec::new();
    for (li, acc) in accuracies.iter().enumerate() {
        let length = 8192u64 << li;
        let correct = (acc * 10.0).round() as usize;
        for i in 0..1000 {
            let id = format!("{length}-{i}");
            tasks.push(Task {
                id: id.clone(),
                question: "q".into(),
                document: "d".into(),
                gold_answers: vec!["yes".into()],
                meta: [("length".to_string(), length.to_string())].into(),
            });
            logs.push(TrajectoryLog {
                task_id: id,
                final_answer: if i < correct { "yes" } else { "no" }.into(),
                ..TrajectoryLog::default()
            });
        }
    }
    build_report(&tasks, &logs, p_c, Tokenizer::Whitespace, Matcher::Exact)
}

fn criterion_10() -> Outcome {
    let reports: BTreeMap<u32, EvalReport> = REFERENCE_PER_LENGTH
        .iter()
        .enumerate()
        .map(|(k, row)| (k as u32, synthetic_report(row, k as u32)))
        .collect();
    let from_lengths = eta_from_reports(&reports);
    let avg_reports: BTreeMap<u32, EvalReport> = REFERENCE_AVG
        .iter()
        .enumerate()
        .map(|(k, avg)| (k as u32, synthetic_report(&[*avg], k as u32)))
        .collect();
    let from_avg = eta_from_reports(&avg_reports);
    for (name, etas) in [("per-length", &from_lengths), ("avg column", &from_avg)] {
        for (k, want) in (1u32..).zip(REFERENCE_ETA) {
            let got = etas.get(&k).copied().unwrap_or(f64::NAN) * 100.0;
            ensure((got - want).abs() <= 0.05, || format!("{name}: eta[{k}] = {got:.4}, expected {want}"))?;
        }
    }
    let fmt = |m: &BTreeMap<u32, f64>| m.values().map(|v| format!("{:.3}", v * 100.0)).collect::<Vec<_>>().join(", ");
    Ok(format!("eta from per-length [{}], from avg column [{}]", fmt(&from_lengths), fmt(&from_avg)))
}

/// `None` when skipped.
fn criterion_11() -> Option<Outcome> {
    std::env::var("MEMREREAD_API_BASE").ok().filter(|s| !s.is_empty())?;
    Some((|| {
        let backend = HttpBackend::new(HttpConfig::default().resolved().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let corpus = corpus()?;
        let sample = generate_sample(&GenSpec::new(TaskType::Statistics, 8192, 0), 0, &corpus).map_err(|e| e.to_string())?;
        let cfg = RunConfig {
            chunk_size_tokens: 5000,
            ..RunConfig::default()
        };
        let log = Agent::new(&backend, &cfg).run(&sample.task).map_err(|e| e.to_string())?;
        let report = validate_trajectory(&log, &cfg, &sample.task);
        ensure(report.is_valid(), || format!("{:?}", report.violations))?;
        Ok(format!(
            "{} calls, {} rereading passes, answer {:?} (gold {})",
            log.llm_calls, log.rereading_passes, log.final_answer, sample.task.gold_answers[0]
        ))
    })())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("advantage-math oracle equivalence", criterion_1),
        ("fixed outcome-advantage vectors", criterion_2),
        ("overall-advantage composition", criterion_3),
        ("generator and oracle agreement", criterion_4),
        ("worked example replication", criterion_5),
        ("workflow conformance", criterion_6),
        ("linear call scaling and constant storage", criterion_7),
        ("chunker losslessness", criterion_8),
        ("prompt protocol conformance", criterion_9),
        ("per-pass gain formula", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    match criterion_11() {
        None => println!("criterion 11 SKIP  live endpoint smoke test: MEMREREAD_API_BASE not set"),
        Some(Ok(detail)) => println!("criterion 11 PASS  live endpoint smoke test: {detail}"),
        Some(Err(detail)) => {
            failed += 1;
            println!("criterion 11 FAIL  live endpoint smoke test: {detail}");
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

//! Rereading-adaptive group advantages computed offline from logged rollouts.
//!
//! For a group of `G` trajectories on one task:
//!
//! * the **outcome advantage** depends only on each trajectory's binary
//!   reward and its number of rereading passes. Homogeneous groups (all right
//!   or all wrong) standardise the pass counts, with the sign chosen so that
//!   fewer passes score higher when everyone is right and more passes score
//!   higher when everyone is wrong. Mixed groups give correct trajectories a
//!   softmax share of `+1` over `exp(-passes)` and incorrect ones a share of
//!   `-1`.
//! * the **state advantage** is the per-step gain in gold-answer recall of the
//!   memory, centred on the group mean at the same `(pass, chunk)` step. Steps
//!   that not every trajectory reached get zero.
//! * the **overall advantage** mixes the two with weight `alpha` on the
//!   outcome term.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::prompt::strip_confirmed_tags;
use crate::types::{check_alpha, check_epsilon, ConfigError, RolloutGroup, SnapshotError, TrajectoryLog};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdvantageError {
    #[error("rollout group is empty")]
    EmptyGroup,
    #[error("advantages need at least 2 trajectories per group, got {0}")]
    GroupTooSmall(usize),
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("reward {value} at index {index} is not 0 or 1")]
    NonBinaryReward { index: usize, value: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Snapshots(#[from] SnapshotError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown matcher `{0}` (expected `exact` or `contains`)")]
pub struct UnknownMatcher(pub String);

/// Rule used to decide whether a final answer matches a gold answer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    /// Normalised strings are equal.
    #[default]
    Exact,
    /// The normalised gold answer occurs inside the normalised prediction.
    Contains,
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matcher::Exact => "exact",
            Matcher::Contains => "contains",
        })
    }
}

impl FromStr for Matcher {
    type Err = UnknownMatcher;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Matcher::Exact),
            "contains" => Ok(Matcher::Contains),
            other => Err(UnknownMatcher(other.to_string())),
        }
    }
}

/// Lowercases, drops every character that is neither alphanumeric nor
/// whitespace, and collapses whitespace runs to single spaces.
pub fn normalize_answer(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// 1.0 when `final_answer` matches any gold answer under `matcher`, else 0.0.
pub fn outcome_reward(final_answer: &str, gold_answers: &[String], matcher: Matcher) -> f64 {
    let prediction = normalize_answer(final_answer);
    let hit = gold_answers.iter().any(|gold| {
        let gold = normalize_answer(gold);
        match matcher {
            Matcher::Exact => prediction == gold,
            Matcher::Contains => !gold.is_empty() && prediction.contains(&gold),
        }
    });
    if hit {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeAdvantages {
    pub values: Vec<f64>,
    /// Group mean of the pass counts.
    pub mu_p: f64,
    /// Population standard deviation of the pass counts.
    pub sigma_p: f64,
}

/// Rereading-adaptive outcome advantage of every trajectory in a group.
pub fn outcome_advantages(rewards: &[f64], passes: &[u32], epsilon: f64) -> Result<OutcomeAdvantages, AdvantageError> {
    check_epsilon(epsilon)?;
    let g = rewards.len();
    if g == 0 {
        return Err(AdvantageError::EmptyGroup);
    }
    if passes.len() != g {
        return Err(AdvantageError::LengthMismatch {
            what: "passes",
            got: passes.len(),
            expected: g,
        });
    }
    let mut correct = Vec::with_capacity(g);
    for (index, &value) in rewards.iter().enumerate() {
        if value == 1.0 {
            correct.push(true);
        } else if value == 0.0 {
            correct.push(false);
        } else {
            return Err(AdvantageError::NonBinaryReward { index, value });
        }
    }

    let p: Vec<f64> = passes.iter().map(|&x| f64::from(x)).collect();
    let mu_p = p.iter().sum::<f64>() / g as f64;
    let sigma_p = (p.iter().map(|x| (x - mu_p).powi(2)).sum::<f64>() / g as f64).sqrt();
    let n_correct = correct.iter().filter(|&&c| c).count();

    let values = if n_correct == 0 || n_correct == g {
        let sign = if n_correct == g { -1.0 } else { 1.0 };
        let denom = sigma_p + epsilon;
        p.iter()
            .map(|x| {
                let centred = x - mu_p;
                // Identical passes with epsilon = 0 would give 0/0.
                if denom == 0.0 {
                    0.0
                } else {
                    sign * centred / denom
                }
            })
            .collect()
    } else {
        // exp(-p) normalised within each reward class; shifting by the class
        // minimum keeps the largest weight at 1.
        let class_min = |class: bool| {
            p.iter()
                .zip(&correct)
                .filter(|(_, &c)| c == class)
                .map(|(x, _)| *x)
                .fold(f64::INFINITY, f64::min)
        };
        let (min_right, min_wrong) = (class_min(true), class_min(false));
        let weight = |x: f64, class: bool| (-(x - if class { min_right } else { min_wrong })).exp();
        let class_sum = |class: bool| {
            p.iter()
                .zip(&correct)
                .filter(|(_, &c)| c == class)
                .map(|(x, _)| weight(*x, class))
                .sum::<f64>()
        };
        let (sum_right, sum_wrong) = (class_sum(true), class_sum(false));
        p.iter()
            .zip(&correct)
            .map(|(&x, &c)| {
                if c {
                    weight(x, true) / sum_right
                } else {
                    -weight(x, false) / sum_wrong
                }
            })
            .collect()
    };
    Ok(OutcomeAdvantages { values, mu_p, sigma_p })
}

fn token_set(text: &str) -> HashSet<String> {
    normalize_answer(text).split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Fraction of the answer's distinct normalised tokens that appear in the
/// memory. `<confirmed>` markers are removed first. An answer with no tokens
/// scores 0.
pub fn recall_score(memory: &str, answer: &str) -> f64 {
    let answer_tokens = token_set(answer);
    if answer_tokens.is_empty() {
        return 0.0;
    }
    let memory_tokens = token_set(&strip_confirmed_tags(memory));
    let hits = answer_tokens.iter().filter(|t| memory_tokens.contains(*t)).count();
    hits as f64 / answer_tokens.len() as f64
}

pub fn max_recall(memory: &str, gold_answers: &[String]) -> f64 {
    gold_answers
        .iter()
        .map(|y| recall_score(memory, y))
        .fold(0.0, f64::max)
}

/// Per-step state rewards indexed `[pass][chunk]`.
pub type StepGrid = Vec<Vec<f64>>;

/// Recall gain of every memory snapshot over its predecessor in the same
/// pass. Each pass starts from a fresh `NO_MEMORY`, whose recall counts as 0.
pub fn state_rewards(log: &TrajectoryLog, gold_answers: &[String]) -> Result<StepGrid, AdvantageError> {
    let grid = log.snapshot_grid()?;
    Ok(grid
        .iter()
        .map(|row| {
            let mut previous = 0.0;
            row.iter()
                .map(|m| {
                    let r = max_recall(&m.text, gold_answers);
                    let gain = r - previous;
                    previous = r;
                    gain
                })
                .collect()
        })
        .collect())
}

fn reached_by_all(grids: &[StepGrid], pass: usize, chunk: usize) -> bool {
    grids.iter().all(|g| g.get(pass).is_some_and(|row| chunk < row.len()))
}

/// Group-centred state advantages. Positions not reached by every trajectory
/// get 0.
pub fn state_advantages(rewards: &[StepGrid]) -> Vec<StepGrid> {
    let g = rewards.len() as f64;
    rewards
        .iter()
        .map(|grid| {
            grid.iter()
                .enumerate()
                .map(|(p, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(t, r)| {
                            if reached_by_all(rewards, p, t) {
                                let mean = rewards.iter().map(|k| k[p][t]).sum::<f64>() / g;
                                r - mean
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mu_p: f64,
    pub sigma_p: f64,
    #[serde(rename = "G")]
    pub g: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageTable {
    pub task_id: String,
    pub outcome: Vec<f64>,
    /// `[trajectory][pass][chunk]`
    pub state: Vec<StepGrid>,
    /// `[trajectory][pass][chunk]`
    pub overall: Vec<StepGrid>,
    pub group_stats: GroupStats,
}

/// Full advantage table for one rollout group.
pub fn overall_advantages(
    group: &RolloutGroup,
    gold_answers: &[String],
    alpha: f64,
    epsilon: f64,
) -> Result<AdvantageTable, AdvantageError> {
    check_alpha(alpha)?;
    let g = group.trajectories.len();
    if g == 0 {
        return Err(AdvantageError::EmptyGroup);
    }
    if g < 2 {
        return Err(AdvantageError::GroupTooSmall(g));
    }
    if group.rewards.len() != g {
        return Err(AdvantageError::LengthMismatch {
            what: "rewards",
            got: group.rewards.len(),
            expected: g,
        });
    }
    let passes: Vec<u32> = group.trajectories.iter().map(|t| t.rereading_passes).collect();
    let outcome = outcome_advantages(&group.rewards, &passes, epsilon)?;
    let rewards = group
        .trajectories
        .iter()
        .map(|t| state_rewards(t, gold_answers))
        .collect::<Result<Vec<_>, _>>()?;
    let state = state_advantages(&rewards);
    let overall = state
        .iter()
        .zip(&outcome.values)
        .map(|(grid, &out)| {
            grid.iter()
                .enumerate()
                .map(|(p, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(t, &s)| {
                            if reached_by_all(&rewards, p, t) {
                                alpha * out + (1.0 - alpha) * s
                            } else {
                                alpha * out
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(AdvantageTable {
        task_id: group.task_id.clone(),
        outcome: outcome.values,
        state,
        overall,
        group_stats: GroupStats {
            mu_p: outcome.mu_p,
            sigma_p: outcome.sigma_p,
            g,
        },
    })
}

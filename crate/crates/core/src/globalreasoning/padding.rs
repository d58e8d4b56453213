use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::facts::FactSet;
use super::{GenError, GenSpec};
use crate::tokenizer::Tokenizer;

/// Background text split into whitespace-normalised sentences.
#[derive(Debug, Clone)]
pub struct Corpus {
    sentences: Vec<String>,
    measures: Vec<usize>,
    tokenizer: Tokenizer,
}

impl Corpus {
    pub fn new(text: &str, tokenizer: Tokenizer) -> Result<Self, GenError> {
        let sentences = split_sentences(text);
        if sentences.is_empty() {
            return Err(GenError::EmptyCorpus);
        }
        let measures = sentences.iter().map(|s| tokenizer.measure(s)).collect();
        Ok(Self {
            sentences,
            measures,
            tokenizer,
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer
    }

    /// Measure of the whole corpus joined with single spaces.
    pub fn measure(&self) -> usize {
        self.measures.iter().sum::<usize>() + self.tokenizer.separator_measure() * (self.len() - 1)
    }
}

/// Splits after `.`, `!` or `?` followed by whitespace and collapses every
/// whitespace run to one space.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for word in text.split_whitespace() {
        current.push(word);
        if word.ends_with(['.', '!', '?']) {
            out.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        out.push(current.join(" "));
    }
    out
}

/// Where each planted statement starts, as a fraction of the document's
/// measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub indirect: Vec<f64>,
    pub distractors: Vec<f64>,
    pub direct_position: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaddedDocument {
    pub document: String,
    pub placement: Placement,
    pub corpus_start: usize,
    pub cycled: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Piece<'a> {
    Background(&'a str),
    Indirect(usize, &'a str),
    Distractor(usize, &'a str),
    Direct(&'a str),
}

impl<'a> Piece<'a> {
    fn text(self) -> &'a str {
        match self {
            Piece::Background(s) | Piece::Indirect(_, s) | Piece::Distractor(_, s) | Piece::Direct(s) => s,
        }
    }
}

/// Lowest and highest allowed start fraction of the direct fact.
pub const DIRECT_RANGE: (f64, f64) = (0.5, 0.9);

/// Splices the facts into background text drawn from `corpus`.
///
/// Background sentences are taken in order from a random start until the
/// target measure (minus the facts) is met, finishing with a prefix of the
/// next sentence; the corpus wraps around when too short. Indirect facts and
/// distractors go to distinct sentence boundaries chosen uniformly at random.
/// The direct fact goes to the boundary whose start fraction is closest to a
/// uniform draw from [`DIRECT_RANGE`], among boundaries inside that range.
pub fn pad_context<R: Rng + ?Sized>(facts: &FactSet, spec: &GenSpec, corpus: &Corpus, rng: &mut R) -> Result<PaddedDocument, GenError> {
    let tok = corpus.tokenizer;
    let sep = tok.separator_measure();
    let target = tok.measure_for_tokens(spec.target_tokens);

    let others: Vec<Piece<'_>> = facts
        .indirect_facts
        .iter()
        .enumerate()
        .map(|(i, s)| Piece::Indirect(i, s))
        .chain(facts.distractors.iter().enumerate().map(|(i, s)| Piece::Distractor(i, s)))
        .collect();
    let direct = Piece::Direct(&facts.direct_fact);
    let fact_measure: usize = others.iter().chain([&direct]).map(|p| tok.measure(p.text()) + sep).sum();
    let too_small = || GenError::TargetTooSmall {
        target: spec.target_tokens,
        facts: tok.tokens_for_measure(fact_measure),
    };
    // Keep at least half of the document as background so the direct fact
    // can land in the second half.
    if fact_measure * 2 > target {
        return Err(too_small());
    }
    let budget = target - fact_measure;

    let start = rng.random_range(0..corpus.len());
    let mut background: Vec<&str> = Vec::new();
    let mut used = 0usize;
    let mut i = start;
    let mut cycled = false;
    loop {
        let idx = i % corpus.len();
        let gap = if background.is_empty() { 0 } else { sep };
        let m = corpus.measures[idx];
        if used + gap + m <= budget {
            background.push(&corpus.sentences[idx]);
            used += gap + m;
            i += 1;
            if i - start == corpus.len() && !cycled {
                cycled = true;
                log::warn!(
                    "background corpus ({} tokens) is shorter than the {}-token target; cycling",
                    tok.tokens_for_measure(corpus.measure()),
                    spec.target_tokens
                );
            }
            continue;
        }
        let room = budget.saturating_sub(used + gap);
        if room > 0 {
            let sentence = &corpus.sentences[idx];
            let fragment = sentence[..tok.prefix_end_for_measure(sentence, room)].trim_end();
            if !fragment.is_empty() {
                background.push(fragment);
            }
        }
        break;
    }

    let boundaries = background.len() + 1;
    if boundaries < others.len() {
        return Err(too_small());
    }
    let mut slot_of: Vec<Option<Piece<'_>>> = vec![None; boundaries];
    for (piece, slot) in others.iter().zip(index::sample(rng, boundaries, others.len())) {
        slot_of[slot] = Some(*piece);
    }
    let mut pieces: Vec<Piece<'_>> = Vec::with_capacity(background.len() + others.len() + 1);
    for (b, slot) in slot_of.into_iter().enumerate() {
        pieces.extend(slot);
        if let Some(text) = background.get(b) {
            pieces.push(Piece::Background(text));
        }
    }

    // Start measure of a piece inserted at each gap of `pieces`.
    let measures: Vec<usize> = pieces.iter().map(|p| tok.measure(p.text())).collect();
    let direct_measure = tok.measure(direct.text());
    let total = (measures.iter().sum::<usize>() + direct_measure + sep * pieces.len()) as f64;
    let mut starts = Vec::with_capacity(pieces.len() + 1);
    let mut acc = 0usize;
    for m in &measures {
        starts.push(acc);
        acc += m + sep;
    }
    starts.push(acc);

    let u = rng.random_range(DIRECT_RANGE.0..=DIRECT_RANGE.1);
    let gap = starts
        .iter()
        .enumerate()
        .map(|(g, &s)| (g, s as f64 / total))
        .filter(|(_, f)| (DIRECT_RANGE.0..=DIRECT_RANGE.1).contains(f))
        .min_by(|a, b| (a.1 - u).abs().total_cmp(&(b.1 - u).abs()))
        .map(|(g, _)| g)
        .ok_or(GenError::NoDirectSlot {
            target: spec.target_tokens,
        })?;
    pieces.insert(gap, direct);

    let mut placement = Placement {
        indirect: vec![0.0; facts.indirect_facts.len()],
        distractors: vec![0.0; facts.distractors.len()],
        direct_position: 0.0,
    };
    let mut acc = 0usize;
    for piece in &pieces {
        let frac = acc as f64 / total;
        match piece {
            Piece::Indirect(i, _) => placement.indirect[*i] = frac,
            Piece::Distractor(i, _) => placement.distractors[*i] = frac,
            Piece::Direct(_) => placement.direct_position = frac,
            Piece::Background(_) => {}
        }
        acc += tok.measure(piece.text()) + sep;
    }

    let document = pieces.iter().map(|p| p.text()).collect::<Vec<_>>().join(" ");
    Ok(PaddedDocument {
        document,
        placement,
        corpus_start: start,
        cycled,
    })
}

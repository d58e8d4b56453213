//! Token counting and deterministic, lossless document chunking.
//!
//! Two built-in tokenizers are provided. `whitespace` counts whitespace
//! separated words; `char4` estimates one token per four characters. Every
//! length-dependent behaviour in the crate (chunk boundaries, generated
//! document lengths, response truncation) is measured with the configured
//! tokenizer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown tokenizer `{0}` (expected `whitespace` or `char4`)")]
pub struct UnknownTokenizer(pub String);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    #[default]
    Whitespace,
    Char4,
}

impl Tokenizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Tokenizer::Whitespace => "whitespace",
            Tokenizer::Char4 => "char4",
        }
    }

    pub fn count(self, text: &str) -> usize {
        self.tokens_for_measure(self.measure(text))
    }

    /// Additive size of `text` in the tokenizer's native unit: words for
    /// `whitespace`, characters for `char4`.
    ///
    /// For whitespace-joined pieces the measure of the joined text is the sum
    /// of the pieces' measures (plus one per separator for `char4`), which lets
    /// callers track exact running counts without rescanning.
    pub fn measure(self, text: &str) -> usize {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().count(),
            Tokenizer::Char4 => text.chars().count(),
        }
    }

    /// Measure contributed by a single-space separator between two pieces.
    pub fn separator_measure(self) -> usize {
        match self {
            Tokenizer::Whitespace => 0,
            Tokenizer::Char4 => 1,
        }
    }

    pub fn tokens_for_measure(self, measure: usize) -> usize {
        match self {
            Tokenizer::Whitespace => measure,
            Tokenizer::Char4 => measure.div_ceil(4),
        }
    }

    /// Largest measure whose token count stays within `tokens`.
    pub fn measure_for_tokens(self, tokens: usize) -> usize {
        match self {
            Tokenizer::Whitespace => tokens,
            Tokenizer::Char4 => tokens.saturating_mul(4),
        }
    }

    /// Byte offset of the longest prefix of `text` whose token count is at
    /// most `budget`. Always lands on a char boundary. Returns `text.len()`
    /// when the whole text fits.
    pub fn max_prefix_end(self, text: &str, budget: usize) -> usize {
        self.prefix_end_for_measure(text, self.measure_for_tokens(budget))
    }

    /// Byte offset of the longest prefix of `text` whose measure is at most
    /// `max_measure`.
    pub fn prefix_end_for_measure(self, text: &str, max_measure: usize) -> usize {
        match self {
            Tokenizer::Whitespace => {
                let mut words = 0usize;
                let mut in_word = false;
                for (i, c) in text.char_indices() {
                    if c.is_whitespace() {
                        in_word = false;
                    } else if !in_word {
                        in_word = true;
                        words += 1;
                        if words > max_measure {
                            return i;
                        }
                    }
                }
                text.len()
            }
            Tokenizer::Char4 => text
                .char_indices()
                .nth(max_measure)
                .map_or(text.len(), |(i, _)| i),
        }
    }

    /// Truncates `text` to at most `max_tokens` tokens.
    pub fn truncate(self, text: &str, max_tokens: usize) -> &str {
        let end = self.max_prefix_end(text, max_tokens);
        &text[..end]
    }
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tokenizer {
    type Err = UnknownTokenizer;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(Tokenizer::Whitespace),
            "char4" => Ok(Tokenizer::Char4),
            other => Err(UnknownTokenizer(other.to_string())),
        }
    }
}

/// Free-function form of [`Tokenizer::count`].
pub fn count_tokens(text: &str, tokenizer: Tokenizer) -> usize {
    tokenizer.count(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub text: String,
    pub token_count: usize,
}

/// Splits `document` into consecutive, non-overlapping chunks of at most
/// `chunk_size_tokens` tokens.
///
/// Each chunk is cut at the last paragraph break inside the budget window; if
/// there is none, at the last sentence end; then the last whitespace; and
/// finally at the hard budget limit. Concatenating the chunk texts yields the
/// input byte for byte.
///
/// # Panics
///
/// Panics if `chunk_size_tokens` is zero.
pub fn chunk_document(document: &str, chunk_size_tokens: usize, tokenizer: Tokenizer) -> Vec<Chunk> {
    assert!(chunk_size_tokens > 0, "chunk_size_tokens must be positive");
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < document.len() {
        let rest = &document[start..];
        let window_end = tokenizer.max_prefix_end(rest, chunk_size_tokens);
        let cut = if window_end == rest.len() {
            rest.len()
        } else {
            preferred_cut(&rest[..window_end])
        };
        let text = &rest[..cut];
        chunks.push(Chunk {
            index: chunks.len(),
            text: text.to_string(),
            token_count: tokenizer.count(text),
        });
        start += cut;
    }
    chunks
}

/// Picks the cut inside `window` (a non-empty prefix that already fits the
/// budget). The returned offset is in `1..=window.len()`.
fn preferred_cut(window: &str) -> usize {
    let mut paragraph = None;
    let mut sentence = None;
    let mut space = None;
    let mut prev: Option<char> = None;
    let mut prev2: Option<char> = None;
    for (i, c) in window.char_indices() {
        let after = i + c.len_utf8();
        if c.is_whitespace() {
            space = Some(after);
            if matches!(prev, Some('.' | '!' | '?')) {
                sentence = Some(after);
            }
            let blank_line = prev == Some('\n') || (prev == Some('\r') && prev2 == Some('\n'));
            if c == '\n' && blank_line {
                paragraph = Some(after);
            }
        }
        prev2 = prev;
        prev = Some(c);
    }
    paragraph
        .or(sentence)
        .or(space)
        .unwrap_or(window.len())
        .max(first_char_len(window))
}

fn first_char_len(s: &str) -> usize {
    s.chars().next().map_or(0, char::len_utf8)
}

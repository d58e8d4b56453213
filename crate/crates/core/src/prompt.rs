//! Prompt templates for the four agent steps and the rule-based parsers that
//! read structured signals back out of model output.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::types::SubQA;

const READING: &str = include_str!("../prompts/reading.txt");
const ANSWERING: &str = include_str!("../prompts/answering.txt");
const DECOMPOSING: &str = include_str!("../prompts/decomposing.txt");
const INTEGRATING: &str = include_str!("../prompts/integrating.txt");

const QUERY_OPEN: &str = "<query>";
const QUERY_CLOSE: &str = "</query>";
const BOXED: &str = "\\boxed{";
const CONFIRMED_OPEN: &str = "<confirmed>";
const CONFIRMED_CLOSE: &str = "</confirmed>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    Reading,
    Answering,
    Decomposing,
    Integrating,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] = [
        PromptKind::Reading,
        PromptKind::Answering,
        PromptKind::Decomposing,
        PromptKind::Integrating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptKind::Reading => "reading",
            PromptKind::Answering => "answering",
            PromptKind::Decomposing => "decomposing",
            PromptKind::Integrating => "integrating",
        }
    }

    /// Placeholders a template of this kind must contain.
    pub fn required_placeholders(self) -> &'static [Placeholder] {
        use Placeholder::*;
        match self {
            PromptKind::Reading => &[Question, Memory, Chunk],
            PromptKind::Answering => &[Question, Memory],
            PromptKind::Decomposing => &[Question, Memory, QaHistory],
            PromptKind::Integrating => &[Question, Memory, Subquestion, Subanswer],
        }
    }

    pub fn default_body(self) -> &'static str {
        match self {
            PromptKind::Reading => READING,
            PromptKind::Answering => ANSWERING,
            PromptKind::Decomposing => DECOMPOSING,
            PromptKind::Integrating => INTEGRATING,
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placeholder {
    Question,
    Memory,
    Chunk,
    QaHistory,
    Subquestion,
    Subanswer,
}

impl Placeholder {
    const ALL: [Placeholder; 6] = [
        Placeholder::Question,
        Placeholder::Memory,
        Placeholder::Chunk,
        Placeholder::QaHistory,
        Placeholder::Subquestion,
        Placeholder::Subanswer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Question => "question",
            Placeholder::Memory => "memory",
            Placeholder::Chunk => "chunk",
            Placeholder::QaHistory => "qa_history",
            Placeholder::Subquestion => "subquestion",
            Placeholder::Subanswer => "subanswer",
        }
    }

    fn parse_at(s: &str) -> Option<(Placeholder, usize)> {
        Self::ALL.into_iter().find_map(|p| {
            let rest = s.strip_prefix('{')?.strip_prefix(p.name())?;
            rest.starts_with('}').then_some((p, p.name().len() + 2))
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("{kind} prompt: missing argument for placeholder {{{placeholder}}}")]
    MissingArgument {
        kind: PromptKind,
        placeholder: &'static str,
    },
    #[error("{kind} template lacks required placeholder {{{placeholder}}}")]
    MissingPlaceholder {
        kind: PromptKind,
        placeholder: &'static str,
    },
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Values substituted into a template. `question` and `memory` are always
/// needed; the rest depend on the template kind.
#[derive(Debug, Clone, Copy)]
pub struct PromptArgs<'a> {
    pub question: &'a str,
    pub memory: &'a str,
    pub chunk: Option<&'a str>,
    pub qa_history: Option<&'a [SubQA]>,
    pub subqa: Option<(&'a str, &'a str)>,
}

impl<'a> PromptArgs<'a> {
    pub fn new(question: &'a str, memory: &'a str) -> Self {
        Self {
            question,
            memory,
            chunk: None,
            qa_history: None,
            subqa: None,
        }
    }

    pub fn chunk(mut self, chunk: &'a str) -> Self {
        self.chunk = Some(chunk);
        self
    }

    pub fn qa_history(mut self, history: &'a [SubQA]) -> Self {
        self.qa_history = Some(history);
        self
    }

    pub fn subqa(mut self, question: &'a str, answer: &'a str) -> Self {
        self.subqa = Some((question, answer));
        self
    }
}

/// Renders sub-question history as numbered `Q: … A: …` lines.
pub fn format_qa_history(history: &[SubQA]) -> String {
    history
        .iter()
        .enumerate()
        .map(|(i, qa)| format!("{}. Q: {} A: {}", i + 1, qa.sub_question, qa.sub_answer))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: PromptKind,
    body: String,
}

impl PromptTemplate {
    pub fn new(kind: PromptKind, body: impl Into<String>) -> Result<Self, PromptError> {
        let body = body.into();
        for p in kind.required_placeholders() {
            if !body.contains(&format!("{{{}}}", p.name())) {
                return Err(PromptError::MissingPlaceholder {
                    kind,
                    placeholder: p.name(),
                });
            }
        }
        Ok(Self { kind, body })
    }

    pub fn builtin(kind: PromptKind) -> Self {
        Self {
            kind,
            body: kind.default_body().to_string(),
        }
    }

    pub fn kind(&self) -> PromptKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Substitutes every `{placeholder}` in one left-to-right pass, so
    /// argument text is never re-scanned for placeholders. Braces that do not
    /// form a known placeholder (such as `\boxed{}`) are copied verbatim.
    pub fn render(&self, args: &PromptArgs<'_>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len() + args.memory.len() + args.chunk.map_or(0, str::len));
        let mut rest = self.body.as_str();
        while let Some(pos) = rest.find('{') {
            out.push_str(&rest[..pos]);
            let tail = &rest[pos..];
            match Placeholder::parse_at(tail) {
                Some((placeholder, len)) => {
                    self.push_value(&mut out, placeholder, args)?;
                    rest = &tail[len..];
                }
                None => {
                    out.push('{');
                    rest = &tail[1..];
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }

    fn push_value(&self, out: &mut String, placeholder: Placeholder, args: &PromptArgs<'_>) -> Result<(), PromptError> {
        let missing = || PromptError::MissingArgument {
            kind: self.kind,
            placeholder: placeholder.name(),
        };
        match placeholder {
            Placeholder::Question => out.push_str(args.question),
            Placeholder::Memory => out.push_str(args.memory),
            Placeholder::Chunk => out.push_str(args.chunk.ok_or_else(missing)?),
            Placeholder::QaHistory => out.push_str(&format_qa_history(args.qa_history.ok_or_else(missing)?)),
            Placeholder::Subquestion => out.push_str(args.subqa.ok_or_else(missing)?.0),
            Placeholder::Subanswer => out.push_str(args.subqa.ok_or_else(missing)?.1),
        }
        Ok(())
    }
}

/// The four templates used by one agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub reading: PromptTemplate,
    pub answering: PromptTemplate,
    pub decomposing: PromptTemplate,
    pub integrating: PromptTemplate,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            reading: PromptTemplate::builtin(PromptKind::Reading),
            answering: PromptTemplate::builtin(PromptKind::Answering),
            decomposing: PromptTemplate::builtin(PromptKind::Decomposing),
            integrating: PromptTemplate::builtin(PromptKind::Integrating),
        }
    }
}

impl PromptSet {
    /// Loads `reading.txt`, `answering.txt`, `decomposing.txt` and
    /// `integrating.txt` from `dir`. Files that do not exist keep the
    /// built-in template.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::default();
        for kind in PromptKind::ALL {
            let path = dir.join(format!("{}.txt", kind.name()));
            if !path.exists() {
                continue;
            }
            let body = fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })?;
            *set.get_mut(kind) = PromptTemplate::new(kind, body)?;
        }
        Ok(set)
    }

    pub fn get(&self, kind: PromptKind) -> &PromptTemplate {
        match kind {
            PromptKind::Reading => &self.reading,
            PromptKind::Answering => &self.answering,
            PromptKind::Decomposing => &self.decomposing,
            PromptKind::Integrating => &self.integrating,
        }
    }

    fn get_mut(&mut self, kind: PromptKind) -> &mut PromptTemplate {
        match kind {
            PromptKind::Reading => &mut self.reading,
            PromptKind::Answering => &mut self.answering,
            PromptKind::Decomposing => &mut self.decomposing,
            PromptKind::Integrating => &mut self.integrating,
        }
    }

    pub fn render(&self, kind: PromptKind, args: &PromptArgs<'_>) -> Result<String, PromptError> {
        self.get(kind).render(args)
    }
}

/// Renders one of the built-in templates.
pub fn render(kind: PromptKind, args: &PromptArgs<'_>) -> Result<String, PromptError> {
    PromptTemplate::builtin(kind).render(args)
}

/// Trimmed content of the first `<query>…</query>` pair. `None` when no
/// well-formed pair exists or the pair is blank, which the agent reads as
/// "memory is sufficient".
pub fn parse_query(output: &str) -> Option<String> {
    let open = output.find(QUERY_OPEN)?;
    let body_start = open + QUERY_OPEN.len();
    let close = output[body_start..].find(QUERY_CLOSE)?;
    let query = output[body_start..body_start + close].trim();
    (!query.is_empty()).then(|| query.to_string())
}

/// Content of the last top-level balanced `\boxed{…}`; falls back to the
/// whole output, trimmed.
pub fn parse_boxed_answer(output: &str) -> String {
    let mut last = None;
    let mut search = 0;
    while let Some(rel) = output[search..].find(BOXED) {
        let content_start = search + rel + BOXED.len();
        match matching_brace(&output[content_start..]) {
            Some(len) => {
                last = Some(&output[content_start..content_start + len]);
                search = content_start + len + 1;
            }
            // Unbalanced: boxes nested inside may still close.
            None => search = content_start,
        }
    }
    match last {
        Some(content) => content.trim().to_string(),
        None => output.trim().to_string(),
    }
}

/// Byte length of the text before the brace that closes an already-open `{`.
fn matching_brace(s: &str) -> Option<usize> {
    let mut depth = 1usize;
    for (i, b) in s.bytes().enumerate() {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Removes `<confirmed>` and `</confirmed>` markers, keeping their content.
/// Markers are dropped even when unpaired.
pub fn strip_confirmed_tags(memory: &str) -> String {
    memory.replace(CONFIRMED_OPEN, "").replace(CONFIRMED_CLOSE, "")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qa(q: &str, a: &str, p: u32) -> SubQA {
        SubQA {
            sub_question: q.into(),
            sub_answer: a.into(),
            pass_index: p,
        }
    }

    #[test]
    fn reading_render() {
        let out = render(PromptKind::Reading, &PromptArgs::new("q1", "NO_MEMORY").chunk("c")).unwrap();
        assert!(out.contains("<problem> q1 </problem>"));
        assert!(out.contains("<memory> NO_MEMORY </memory>"));
        assert!(out.contains("<section> c </section>"));
        assert!(out.ends_with("Updated memory:"));
    }

    #[test]
    fn answering_keeps_literal_boxed_braces() {
        let out = render(PromptKind::Answering, &PromptArgs::new("q", "m")).unwrap();
        assert!(out.contains("put the answer in \\boxed{}."));
        assert!(out.contains("<memory> m </memory>"));
    }

    #[test]
    fn decomposing_with_empty_history() {
        let out = render(PromptKind::Decomposing, &PromptArgs::new("q", "m").qa_history(&[])).unwrap();
        let start = out.find("<query_history>").unwrap() + "<query_history>".len();
        let end = out.find("</query_history>").unwrap();
        assert!(out[start..end].trim().is_empty());
    }

    #[test]
    fn decomposing_with_history() {
        let h = [qa("sq1", "sa1", 1), qa("sq2", "sa2", 2)];
        let out = render(PromptKind::Decomposing, &PromptArgs::new("q", "m").qa_history(&h)).unwrap();
        assert!(out.contains("<query_history> 1. Q: sq1 A: sa1\n2. Q: sq2 A: sa2 </query_history>"));
    }

    #[test]
    fn integrating_render() {
        let out = render(PromptKind::Integrating, &PromptArgs::new("q", "m").subqa("sq", "sa")).unwrap();
        assert!(out.contains("<subquestion> sq </subquestion>"));
        assert!(out.contains("<subanswer> sa </subanswer>"));
        assert!(out.ends_with("</reference>\nUpdated memory:"));
    }

    #[test]
    fn missing_argument_names_placeholder() {
        let err = render(PromptKind::Reading, &PromptArgs::new("q", "m")).unwrap_err();
        assert!(matches!(
            err,
            PromptError::MissingArgument {
                placeholder: "chunk",
                ..
            }
        ));
        let err = render(PromptKind::Integrating, &PromptArgs::new("q", "m")).unwrap_err();
        assert!(err.to_string().contains("{subquestion}"));
    }

    #[test]
    fn arguments_are_not_rescanned() {
        let out = render(PromptKind::Answering, &PromptArgs::new("{memory}", "M")).unwrap();
        assert!(out.contains("<problem> {memory} </problem>"));
    }

    #[test]
    fn custom_template_must_keep_placeholders() {
        assert!(PromptTemplate::new(PromptKind::Reading, "{question} {memory}").is_err());
        let t = PromptTemplate::new(PromptKind::Answering, "Q={question} M={memory}").unwrap();
        assert_eq!(t.render(&PromptArgs::new("a", "b")).unwrap(), "Q=a M=b");
    }

    #[test]
    fn query_parsing() {
        assert_eq!(parse_query("blah <query>Who is X?</query> tail").as_deref(), Some("Who is X?"));
        assert_eq!(parse_query("Memory is sufficient."), None);
        assert_eq!(parse_query("<query>a</query> text <query>b</query>").as_deref(), Some("a"));
        assert_eq!(parse_query("<query>  spaced  </query>").as_deref(), Some("spaced"));
        assert_eq!(parse_query("<query>unterminated"), None);
        assert_eq!(parse_query("</query>x<query>"), None);
        assert_eq!(parse_query("<query>   </query>"), None);
    }

    #[test]
    fn boxed_parsing() {
        assert_eq!(parse_boxed_answer("The answer is \\boxed{3}"), "3");
        assert_eq!(parse_boxed_answer("\\boxed{a\\boxed{b}c}"), "a\\boxed{b}c");
        assert_eq!(parse_boxed_answer("no box here"), "no box here");
        assert_eq!(parse_boxed_answer("\\boxed{1} then \\boxed{2}"), "2");
        assert_eq!(parse_boxed_answer("\\boxed{open \\boxed{x}"), "x");
        assert_eq!(parse_boxed_answer("  \\boxed{ {1,2} } "), "{1,2}");
        assert_eq!(parse_boxed_answer("\\boxed{unclosed"), "\\boxed{unclosed");
    }

    #[test]
    fn confirmed_stripping() {
        assert_eq!(strip_confirmed_tags("x <confirmed>y</confirmed> z"), "x y z");
        assert_eq!(strip_confirmed_tags("no tags"), "no tags");
        assert_eq!(strip_confirmed_tags("<confirmed>y"), "y");
    }
}

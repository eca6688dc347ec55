//! Deterministic tokenization, normalization, and sentence splitting.
//!
//! Everything here is pure and rule-based so that entity matching and
//! ROUGE scores are reproducible across runs and platforms. All offsets
//! are counted in Unicode scalar values, not bytes.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::{LazyLock, OnceLock};

use crate::error::{Error, Result};

/// A token with its source span in Unicode scalar offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: (usize, usize),
}

/// A sentence span plus the tokens it contains. Token spans are absolute
/// offsets into the same source string as the sentence span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub span: (usize, usize),
    pub tokens: Vec<Token>,
}

/// Characters that stay inside a token when surrounded by alphanumerics,
/// so "Hawking's" and "state-of-the-art" survive as single tokens.
fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

/// Splits on whitespace and breaks punctuation out into standalone
/// single-character tokens. Internal hyphens and apostrophes are kept.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphanumeric() {
            i += 1;
            loop {
                if i < chars.len() && chars[i].is_alphanumeric() {
                    i += 1;
                } else if i + 1 < chars.len()
                    && is_joiner(chars[i])
                    && chars[i + 1].is_alphanumeric()
                {
                    i += 2;
                } else {
                    break;
                }
            }
        } else {
            i += 1;
        }
        tokens.push(Token {
            text: chars[start..i].iter().collect(),
            span: (start, i),
        });
    }
    tokens
}

/// Lowercases, collapses internal whitespace to single spaces, and strips
/// non-alphanumeric characters from both ends. Idempotent.
pub fn normalize_token(token: &str) -> String {
    let lower = token.to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

/// Whitespace words of `text`, each passed through [`normalize_token`],
/// with words that normalize to nothing (pure punctuation) dropped.
pub fn normalize_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|w| !w.is_empty())
        .collect()
}

/// The curated abbreviation list that suppresses false sentence splits.
/// Entries are matched case-sensitively against the whole word ending in
/// the period (e.g. "Prof.", "e.g.").
#[derive(Debug, Clone)]
pub struct Abbreviations {
    entries: HashSet<String>,
}

static DEFAULT_ABBREVIATIONS: LazyLock<Abbreviations> =
    LazyLock::new(|| Abbreviations::from_str(include_str!("../resources/abbreviations.txt")));

static INSTALLED_ABBREVIATIONS: OnceLock<Abbreviations> = OnceLock::new();

impl Abbreviations {
    /// Parses one abbreviation per line; blank lines and `#` comments are
    /// ignored.
    pub fn from_str(contents: &str) -> Self {
        let entries = contents
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        Abbreviations { entries }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let contents = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_str(&contents))
    }

    pub fn default_set() -> &'static Abbreviations {
        &DEFAULT_ABBREVIATIONS
    }

    /// Replaces the process-wide abbreviation list used by
    /// [`split_sentences`]. Call once at startup, before any splitting;
    /// fails if a list was already installed.
    pub fn install(self) -> Result<()> {
        INSTALLED_ABBREVIATIONS
            .set(self)
            .map_err(|_| Error::parameter("an abbreviation list is already installed"))
    }

    fn active() -> &'static Abbreviations {
        INSTALLED_ABBREVIATIONS
            .get()
            .unwrap_or(&DEFAULT_ABBREVIATIONS)
    }

    fn contains(&self, word: &str) -> bool {
        self.entries.contains(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn is_opening(c: char) -> bool {
    matches!(
        c,
        '(' | '[' | '{' | '"' | '\'' | '\u{201C}' | '\u{2018}' | '\u{00AB}'
    )
}

fn is_closing(c: char) -> bool {
    matches!(
        c,
        ')' | ']' | '}' | '"' | '\'' | '\u{201D}' | '\u{2019}' | '\u{00BB}'
    )
}

/// Splits on `.`, `!`, `?` followed by whitespace and an uppercase or
/// opening character. Uses the installed abbreviation list, or the
/// shipped default.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    split_sentences_with(text, Abbreviations::active())
}

/// [`split_sentences`] with a caller-supplied abbreviation list.
pub fn split_sentences_with(text: &str, abbreviations: &Abbreviations) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let mut boundaries = Vec::new(); // index just past each sentence end

    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let punct_start = i;
        let mut end = i;
        while end < chars.len() && matches!(chars[end], '.' | '!' | '?') {
            end += 1;
        }
        while end < chars.len() && is_closing(chars[end]) {
            end += 1;
        }
        // Needs at least one whitespace char, then an uppercase or
        // opening character, to count as a boundary.
        let mut next = end;
        while next < chars.len() && chars[next].is_whitespace() {
            next += 1;
        }
        let splits = next > end
            && next < chars.len()
            && (chars[next].is_uppercase() || is_opening(chars[next]));
        if splits && !suppressed_by_abbreviation(&chars, punct_start, end, abbreviations) {
            boundaries.push(end);
        }
        i = end.max(i + 1);
    }

    let mut sentences = Vec::new();
    let mut segment_start = 0;
    for &boundary in boundaries.iter().chain(std::iter::once(&chars.len())) {
        if let Some(span) = trim_span(&chars, segment_start, boundary) {
            sentences.push(span);
        }
        segment_start = boundary;
    }

    attach_tokens(text, sentences)
}

/// Abbreviation suppression applies only to a lone period. The word is
/// everything back to the previous whitespace, including the period, with
/// leading punctuation (e.g. an opening parenthesis) stripped. A single
/// uppercase letter before the period is treated as an initial.
fn suppressed_by_abbreviation(
    chars: &[char],
    punct_start: usize,
    punct_end: usize,
    abbreviations: &Abbreviations,
) -> bool {
    if punct_end - punct_start != 1 || chars[punct_start] != '.' {
        return false;
    }
    let mut word_start = punct_start;
    while word_start > 0 && !chars[word_start - 1].is_whitespace() {
        word_start -= 1;
    }
    while word_start < punct_start && !chars[word_start].is_alphanumeric() {
        word_start += 1;
    }
    if word_start == punct_start {
        return false;
    }
    if punct_start - word_start == 1 && chars[word_start].is_uppercase() {
        return true; // initials: "J. Smith"
    }
    let word: String = chars[word_start..=punct_start].iter().collect();
    abbreviations.contains(&word)
}

fn trim_span(chars: &[char], start: usize, end: usize) -> Option<(usize, usize)> {
    let mut s = start;
    while s < end && chars[s].is_whitespace() {
        s += 1;
    }
    let mut e = end;
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    (s < e).then_some((s, e))
}

fn attach_tokens(text: &str, spans: Vec<(usize, usize)>) -> Vec<Sentence> {
    let tokens = tokenize(text);
    let mut cursor = 0;
    spans
        .into_iter()
        .map(|span| {
            let mut sentence_tokens = Vec::new();
            while cursor < tokens.len() && tokens[cursor].span.1 <= span.1 {
                debug_assert!(tokens[cursor].span.0 >= span.0);
                sentence_tokens.push(tokens[cursor].clone());
                cursor += 1;
            }
            Sentence {
                span,
                tokens: sentence_tokens,
            }
        })
        .collect()
}

/// Slices `text` by Unicode scalar offsets.
pub fn slice_scalars(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_separates_punctuation() {
        assert_eq!(texts(&tokenize("The cat sat.")), ["The", "cat", "sat", "."]);
    }

    #[test]
    fn tokenize_keeps_internal_apostrophe() {
        assert_eq!(texts(&tokenize("Hawking's panel")), ["Hawking's", "panel"]);
    }

    #[test]
    fn tokenize_keeps_internal_hyphen() {
        assert_eq!(texts(&tokenize("state-of-the-art, yes")), ["state-of-the-art", ",", "yes"]);
    }

    #[test]
    fn tokenize_spans_match_source() {
        let text = "Naïve £3,000 plan—ok";
        let chars: Vec<char> = text.chars().collect();
        for token in tokenize(text) {
            let (s, e) = token.span;
            assert!(s < e);
            let slice: String = chars[s..e].iter().collect();
            assert_eq!(slice, token.text);
        }
    }

    #[test]
    fn normalize_strips_case_and_punct() {
        assert_eq!(normalize_token("YouTube."), "youtube");
        assert_eq!(normalize_token("london"), "london");
        assert_eq!(normalize_token("  John  Smith "), "john smith");
        assert_eq!(normalize_token("£3,000"), "3,000");
        assert_eq!(normalize_token("..."), "");
    }

    #[test]
    fn normalize_is_idempotent() {
        for s in ["YouTube.", "  John  Smith ", "e.g.", "£3,000", "ÊTRE"] {
            let once = normalize_token(s);
            assert_eq!(normalize_token(&once), once);
        }
    }

    #[test]
    fn split_two_sentences() {
        let sentences = split_sentences("A b. C d.");
        assert_eq!(sentences.len(), 2);
        assert_eq!(sentences[0].span, (0, 4));
        assert_eq!(sentences[1].span, (5, 9));
    }

    #[test]
    fn split_suppresses_abbreviations() {
        assert_eq!(split_sentences("Prof. Hawking judged.").len(), 1);
        assert_eq!(split_sentences("See e.g. The report.").len(), 1);
        assert_eq!(split_sentences("J. Smith arrived. He sat.").len(), 2);
    }

    #[test]
    fn split_empty_is_empty() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn split_requires_uppercase_continuation() {
        assert_eq!(split_sentences("It cost 5. then more came").len(), 1);
        assert_eq!(split_sentences("Stop! Go now.").len(), 2);
    }

    #[test]
    fn sentence_tokens_lie_within_span() {
        let text = "Prof. Hawking judged. The panel, met in London!";
        for sentence in split_sentences(text) {
            assert!(!sentence.tokens.is_empty());
            for token in &sentence.tokens {
                assert!(token.span.0 >= sentence.span.0);
                assert!(token.span.1 <= sentence.span.1);
            }
        }
    }

    #[test]
    fn sentence_spans_cover_non_whitespace() {
        let text = "One two. Three four! Five?";
        let sentences = split_sentences(text);
        let chars: Vec<char> = text.chars().collect();
        for (i, c) in chars.iter().enumerate() {
            if !c.is_whitespace() {
                assert!(
                    sentences.iter().any(|s| i >= s.span.0 && i < s.span.1),
                    "char {i} {c:?} not covered"
                );
            }
        }
    }
}

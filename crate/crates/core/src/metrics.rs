//! Entity coverage precision, ROUGE-1/2/L, and entity-count statistics.
//!
//! Entity coverage precision is the fraction of named entities in a
//! summary that are covered by the source document, a proxy for
//! extrinsic entity hallucination. ROUGE here is the plain reproducible
//! variant: no stemming, no stopword removal, lowercased tokens,
//! multiset (clipped) n-gram counting, and summary-level LCS for
//! ROUGE-L.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ner::{extract_entities, EntitySet};
use crate::text::{normalize_token, normalize_words, tokenize};

/// How hypothesis entities are matched against the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Literal set intersection: covered iff the form is in N(source).
    StrictSet,
    /// Covered iff the form is in N(source) or occurs in the normalized
    /// source text on token boundaries. The default; it absorbs mention
    /// boundary mismatches between summary and document ("Hawking" vs
    /// "Stephen Hawking" still differs, but "5 March" inside a longer
    /// date span matches).
    #[default]
    SourceText,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict-set" => Ok(MatchMode::StrictSet),
            "source-text" => Ok(MatchMode::SourceText),
            other => Err(Error::parameter(format!(
                "unknown matching mode {other:?} (expected strict-set or source-text)"
            ))),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::StrictSet => "strict-set",
            MatchMode::SourceText => "source-text",
        })
    }
}

/// Entity coverage precision for one hypothesis. An entity-free
/// hypothesis hallucinates nothing, so it scores 1.0 with `vacuous` set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionResult {
    pub value: f64,
    pub hypothesis_entity_count: usize,
    pub covered_count: usize,
    pub vacuous: bool,
}

/// ROUGE precision/recall/F1 triple, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(matches: usize, hyp_total: usize, ref_total: usize) -> Self {
        let precision = ratio(matches, hyp_total);
        let recall = ratio(matches, ref_total);
        RougeScore {
            precision,
            recall,
            f1: f_measure(precision, recall),
        }
    }
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        numerator as f64 / denominator as f64
    }
}

pub(crate) fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Fraction of hypothesis entities covered by the source document.
pub fn entity_precision(
    hyp_entities: &EntitySet,
    source_text: &str,
    source_entities: &EntitySet,
    mode: MatchMode,
) -> PrecisionResult {
    let hypothesis_entity_count = hyp_entities.len();
    if hypothesis_entity_count == 0 {
        return PrecisionResult {
            value: 1.0,
            hypothesis_entity_count: 0,
            covered_count: 0,
            vacuous: true,
        };
    }
    let haystack = match mode {
        MatchMode::StrictSet => None,
        MatchMode::SourceText => Some(format!(" {} ", normalize_words(source_text).join(" "))),
    };
    let covered_count = hyp_entities
        .iter()
        .filter(|form| {
            source_entities.contains(form)
                || haystack
                    .as_deref()
                    .is_some_and(|hay| hay.contains(&format!(" {form} ")))
        })
        .count();
    PrecisionResult {
        value: covered_count as f64 / hypothesis_entity_count as f64,
        hypothesis_entity_count,
        covered_count,
        vacuous: false,
    }
}

fn cmp_grams<A: AsRef<str>, B: AsRef<str>>(
    xs: &[A],
    x: usize,
    ys: &[B],
    y: usize,
    n: usize,
) -> Ordering {
    for k in 0..n {
        match xs[x + k].as_ref().cmp(ys[y + k].as_ref()) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn sorted_gram_starts<T: AsRef<str>>(tokens: &[T], n: usize) -> Vec<usize> {
    if tokens.len() < n {
        return Vec::new();
    }
    let mut starts: Vec<usize> = (0..=tokens.len() - n).collect();
    starts.sort_unstable_by(|&a, &b| cmp_grams(tokens, a, tokens, b, n));
    starts
}

/// ROUGE-N with clipped (multiset) n-gram counting.
pub fn rouge_n<H: AsRef<str>, R: AsRef<str>>(
    hyp_tokens: &[H],
    ref_tokens: &[R],
    n: usize,
) -> Result<RougeScore> {
    if n == 0 {
        return Err(Error::parameter("rouge_n requires n >= 1"));
    }
    let hyp_starts = sorted_gram_starts(hyp_tokens, n);
    let ref_starts = sorted_gram_starts(ref_tokens, n);

    let mut matches = 0;
    let (mut i, mut j) = (0, 0);
    while i < hyp_starts.len() && j < ref_starts.len() {
        match cmp_grams(hyp_tokens, hyp_starts[i], ref_tokens, ref_starts[j], n) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                matches += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(RougeScore::from_counts(
        matches,
        hyp_starts.len(),
        ref_starts.len(),
    ))
}

/// Summary-level ROUGE-L: longest common subsequence over the whole
/// token sequences.
pub fn rouge_l<H: AsRef<str>, R: AsRef<str>>(hyp_tokens: &[H], ref_tokens: &[R]) -> RougeScore {
    let lcs = lcs_length(hyp_tokens, ref_tokens);
    RougeScore::from_counts(lcs, hyp_tokens.len(), ref_tokens.len())
}

fn lcs_length<H: AsRef<str>, R: AsRef<str>>(xs: &[H], ys: &[R]) -> usize {
    if xs.is_empty() || ys.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; ys.len() + 1];
    for x in xs {
        let mut diagonal = 0;
        for (j, y) in ys.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() {
                diagonal + 1
            } else {
                above.max(row[j])
            };
            diagonal = above;
        }
    }
    row[ys.len()]
}

/// Number of entity mentions in a text (span count, not set size), via
/// the built-in extractor.
pub fn entity_count(text: &str) -> usize {
    extract_entities(text, None).len()
}

/// Normalized word tokens for ROUGE scoring: tokenize, lowercase, strip
/// edge punctuation, drop tokens that normalize to nothing.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .iter()
        .map(|t| normalize_token(&t.text))
        .filter(|t| !t.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(forms: &[&str]) -> EntitySet {
        EntitySet::from_forms(forms.iter().map(|f| f.to_string()))
    }

    #[test]
    fn strict_set_precision_counts_intersection() {
        let result = entity_precision(
            &set(&["youtube", "gumtree"]),
            "irrelevant",
            &set(&["youtube", "hawking"]),
            MatchMode::StrictSet,
        );
        assert_eq!(result.value, 0.5);
        assert_eq!(result.hypothesis_entity_count, 2);
        assert_eq!(result.covered_count, 1);
        assert!(!result.vacuous);
    }

    #[test]
    fn empty_hypothesis_is_vacuous() {
        let result = entity_precision(&set(&[]), "text", &set(&["x"]), MatchMode::StrictSet);
        assert_eq!(result.value, 1.0);
        assert!(result.vacuous);
    }

    #[test]
    fn source_text_mode_matches_on_token_boundaries() {
        let result = entity_precision(
            &set(&["london", "2019", "john smith"]),
            "London saw heavy floods in 2019, said Johnson.",
            &set(&[]),
            MatchMode::SourceText,
        );
        assert_eq!(result.covered_count, 2);
        assert!((result.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn source_text_does_not_match_inside_words() {
        // "art" must not match inside "startled"
        let result = entity_precision(
            &set(&["art"]),
            "He startled everyone.",
            &set(&[]),
            MatchMode::SourceText,
        );
        assert_eq!(result.covered_count, 0);
    }

    #[test]
    fn strict_coverage_implies_source_text_coverage() {
        let hyp = set(&["london", "gumtree"]);
        let source_entities = set(&["london"]);
        let text = "A report from London.";
        let strict = entity_precision(&hyp, text, &source_entities, MatchMode::StrictSet);
        let loose = entity_precision(&hyp, text, &source_entities, MatchMode::SourceText);
        assert!(loose.value >= strict.value);
    }

    #[test]
    fn rouge_n_identity_is_one() {
        let tokens = ["a", "b", "c"];
        let score = rouge_n(&tokens, &tokens, 1).unwrap();
        assert_eq!((score.precision, score.recall, score.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn rouge_2_prefix_example() {
        let score = rouge_n(&["a", "b", "c"], &["a", "b", "c", "d"], 2).unwrap();
        assert_eq!(score.precision, 1.0);
        assert!((score.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((score.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rouge_n_disjoint_is_zero() {
        let score = rouge_n(&["a", "b"], &["c", "d"], 1).unwrap();
        assert_eq!((score.precision, score.recall, score.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge_n_rejects_zero() {
        assert!(rouge_n(&["a"], &["a"], 0).is_err());
    }

    #[test]
    fn rouge_n_clips_repeated_grams() {
        // hyp has "a" three times, ref twice: clipped match is 2.
        let score = rouge_n(&["a", "a", "a"], &["a", "a", "b"], 1).unwrap();
        assert!((score.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((score.recall - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_n_longer_than_both_sides_is_zero() {
        let score = rouge_n(&["a", "b"], &["a", "b", "c"], 4).unwrap();
        assert_eq!((score.precision, score.recall, score.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge_l_hand_example() {
        let score = rouge_l(
            &["the", "cat", "the", "mat"],
            &["the", "cat", "sat", "on", "the", "mat"],
        );
        assert_eq!(score.precision, 1.0);
        assert!((score.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((score.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rouge_l_identity_and_empty() {
        let tokens = ["x", "y"];
        let score = rouge_l(&tokens, &tokens);
        assert_eq!((score.precision, score.recall, score.f1), (1.0, 1.0, 1.0));

        let empty: [&str; 0] = [];
        let score = rouge_l(&empty, &tokens);
        assert_eq!((score.precision, score.recall, score.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn swapping_sides_swaps_precision_and_recall() {
        let hyp = ["a", "b", "c"];
        let reference = ["a", "c", "d", "e"];
        for n in 1..=2 {
            let fwd = rouge_n(&hyp, &reference, n).unwrap();
            let rev = rouge_n(&reference, &hyp, n).unwrap();
            assert_eq!(fwd.precision, rev.recall);
            assert_eq!(fwd.recall, rev.precision);
            assert_eq!(fwd.f1, rev.f1);
        }
        let fwd = rouge_l(&hyp, &reference);
        let rev = rouge_l(&reference, &hyp);
        assert_eq!(fwd.precision, rev.recall);
        assert_eq!(fwd.recall, rev.precision);
        assert_eq!(fwd.f1, rev.f1);
    }

    #[test]
    fn entity_count_counts_mentions() {
        assert_eq!(entity_count(""), 0);
        assert_eq!(entity_count("Stephen Hawking joined YouTube"), 2);
        assert_eq!(entity_count("He watched YouTube, then praised YouTube."), 2);
    }

    #[test]
    fn rouge_tokens_drop_punctuation() {
        assert_eq!(rouge_tokens("The cat sat."), ["the", "cat", "sat"]);
        assert_eq!(rouge_tokens("Hawking's panel!"), ["hawking's", "panel"]);
    }
}

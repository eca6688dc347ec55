//! Rule-based named-entity extraction and ingestion of externally
//! produced annotations.
//!
//! The built-in extractor is a deterministic stand-in for a neural NER
//! system: capitalized proper-noun runs, number/money/date patterns, and
//! optional gazetteer matches. Any other entity source can be plugged in
//! through the annotation file contract.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::text::{self, split_sentences};

/// One entity mention with its coarse label and span in Unicode scalar
/// offsets. Spans within one extraction never overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub text: String,
    pub label: String,
    pub span: (usize, usize),
}

/// The normalized, deduplicated entity surface forms of a text: N(t).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EntitySet {
    forms: BTreeSet<String>,
}

impl EntitySet {
    pub fn from_forms(forms: impl IntoIterator<Item = String>) -> Self {
        EntitySet {
            forms: forms
                .into_iter()
                .map(|f| text::normalize_words(&f).join(" "))
                .filter(|f| !f.is_empty())
                .collect(),
        }
    }

    pub fn contains(&self, form: &str) -> bool {
        self.forms.contains(form)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.forms.iter().map(String::as_str)
    }
}

/// Normalized, deduplicated forms of the given spans. Invariant under
/// span reordering and duplication.
pub fn entity_set(spans: &[EntitySpan]) -> EntitySet {
    EntitySet::from_forms(spans.iter().map(|s| s.text.clone()))
}

/// An exact-match surface-form list. Gazetteer matches take precedence
/// over all rule-based candidates on overlap.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    name: String,
    entries: Vec<String>,
}

impl Gazetteer {
    /// `entries` are matched case-sensitively on word boundaries.
    pub fn new(name: impl Into<String>, entries: Vec<String>) -> Self {
        let mut entries: Vec<String> =
            entries.into_iter().filter(|e| !e.trim().is_empty()).collect();
        entries.sort();
        entries.dedup();
        Gazetteer {
            name: name.into(),
            entries,
        }
    }

    /// Loads one entry per line; the gazetteer name is the file stem.
    pub fn from_path(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "gazetteer".to_string());
        Ok(Self::new(
            name,
            contents.lines().map(|l| l.trim().to_string()).collect(),
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

static MONEY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[£$€¥]\d[\d,]*(?:\.\d+)?").unwrap());
static DATE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b\d{1,2}\s+(?:January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec)\s+\d{4}\b",
    )
    .unwrap()
});
static NUMERIC_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b\d+(?:,\d{3})*(?:\.\d+)?\b").unwrap());

#[derive(Debug)]
struct Candidate {
    span: (usize, usize),
    label: String,
    // 0 = gazetteer, 1 = everything else; lower wins overlaps.
    priority: u8,
}

/// Deterministic entity extraction:
/// * maximal runs of capitalized tokens, excluding single capitalized
///   words at sentence start ("The", "However");
/// * numbers, currency-prefixed amounts, and day-month-year dates;
/// * exact gazetteer matches, which take precedence on overlap.
///
/// Longest match wins remaining overlaps; output is ordered by start.
pub fn extract_entities(text: &str, gazetteer: Option<&Gazetteer>) -> Vec<EntitySpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut candidates = Vec::new();

    for sentence in split_sentences(text) {
        let tokens = &sentence.tokens;
        let mut idx = 0;
        while idx < tokens.len() {
            if !is_capitalized(&tokens[idx].text) {
                idx += 1;
                continue;
            }
            let run_start = idx;
            while idx < tokens.len() && is_capitalized(&tokens[idx].text) {
                idx += 1;
            }
            let sentence_initial = run_start == 0;
            let run_len = idx - run_start;
            if sentence_initial && run_len < 2 {
                continue;
            }
            candidates.push(Candidate {
                span: (tokens[run_start].span.0, tokens[idx - 1].span.1),
                label: "PROPN_SPAN".to_string(),
                priority: 1,
            });
        }
    }

    let offsets = ScalarOffsets::new(text);
    for (regex, label) in [
        (&*MONEY_RE, "MONEY"),
        (&*DATE_RE, "DATE"),
        (&*NUMERIC_RE, "NUMERIC"),
    ] {
        for found in regex.find_iter(text) {
            candidates.push(Candidate {
                span: offsets.to_scalars(found.start(), found.end()),
                label: label.to_string(),
                priority: 1,
            });
        }
    }

    if let Some(gazetteer) = gazetteer {
        let label = format!("GAZETTEER:{}", gazetteer.name);
        for entry in &gazetteer.entries {
            for (byte_start, matched) in text.match_indices(entry.as_str()) {
                let span = offsets.to_scalars(byte_start, byte_start + matched.len());
                if on_word_boundaries(&chars, span) {
                    candidates.push(Candidate {
                        span,
                        label: label.clone(),
                        priority: 0,
                    });
                }
            }
        }
    }

    resolve_overlaps(candidates, &chars)
}

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_uppercase())
}

fn on_word_boundaries(chars: &[char], span: (usize, usize)) -> bool {
    let before_ok = span.0 == 0 || !chars[span.0 - 1].is_alphanumeric();
    let after_ok = span.1 >= chars.len() || !chars[span.1].is_alphanumeric();
    before_ok && after_ok
}

fn resolve_overlaps(mut candidates: Vec<Candidate>, chars: &[char]) -> Vec<EntitySpan> {
    candidates.sort_by(|a, b| {
        a.priority
            .cmp(&b.priority)
            .then((b.span.1 - b.span.0).cmp(&(a.span.1 - a.span.0)))
            .then(a.span.0.cmp(&b.span.0))
            .then(a.label.cmp(&b.label))
    });
    let mut accepted: Vec<Candidate> = Vec::new();
    for candidate in candidates {
        let overlaps = accepted
            .iter()
            .any(|a| candidate.span.0 < a.span.1 && a.span.0 < candidate.span.1);
        if !overlaps {
            accepted.push(candidate);
        }
    }
    accepted.sort_by_key(|c| c.span.0);
    accepted
        .into_iter()
        .map(|c| EntitySpan {
            text: chars[c.span.0..c.span.1].iter().collect(),
            label: c.label,
            span: c.span,
        })
        .collect()
}

/// Byte-offset to scalar-offset translation for regex matches.
struct ScalarOffsets {
    byte_starts: Vec<usize>,
}

impl ScalarOffsets {
    fn new(text: &str) -> Self {
        ScalarOffsets {
            byte_starts: text.char_indices().map(|(b, _)| b).collect(),
        }
    }

    fn to_scalars(&self, byte_start: usize, byte_end: usize) -> (usize, usize) {
        let start = self
            .byte_starts
            .partition_point(|&b| b < byte_start);
        let end = self.byte_starts.partition_point(|&b| b < byte_end);
        (start, end)
    }
}

/// Which text of a pair an annotation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatedField {
    Document,
    ReferenceSummary,
    Hypothesis,
}

impl fmt::Display for AnnotatedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AnnotatedField::Document => "document",
            AnnotatedField::ReferenceSummary => "reference_summary",
            AnnotatedField::Hypothesis => "hypothesis",
        };
        f.write_str(name)
    }
}

/// Externally produced entity spans keyed by pair id and field. Absent
/// entries mean the annotator found no entities for that text.
pub type AnnotationMap = HashMap<(String, AnnotatedField), Vec<EntitySpan>>;

#[derive(Deserialize)]
struct AnnotationRecord {
    id: String,
    field: AnnotatedField,
    spans: Vec<AnnotationSpan>,
}

#[derive(Deserialize)]
struct AnnotationSpan {
    start: usize,
    end: usize,
    text: String,
    label: String,
}

/// Loads annotation JSONL and validates every span against the dataset:
/// offsets must be in range and the span text must equal the referenced
/// substring (offsets in Unicode scalar values).
pub fn load_external_annotations(path: &Path, dataset: &Dataset) -> Result<AnnotationMap> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let pairs: HashMap<&str, &crate::corpus::Pair> =
        dataset.pairs.iter().map(|p| (p.id.as_str(), p)).collect();

    let mut map = AnnotationMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("invalid annotation record: {e}"),
        })?;

        let annotation_error = |message: String| Error::Annotation {
            id: record.id.clone(),
            field: record.field.to_string(),
            message,
        };

        let pair = pairs
            .get(record.id.as_str())
            .ok_or_else(|| annotation_error("no such pair in dataset".to_string()))?;
        let target = match record.field {
            AnnotatedField::Document => Some(pair.document.as_str()),
            AnnotatedField::ReferenceSummary => pair.reference_summary.as_deref(),
            AnnotatedField::Hypothesis => pair.hypothesis.as_deref(),
        }
        .ok_or_else(|| annotation_error("pair has no such text field".to_string()))?;
        let target_chars: Vec<char> = target.chars().collect();

        let mut spans = Vec::with_capacity(record.spans.len());
        for span in &record.spans {
            if span.start >= span.end || span.end > target_chars.len() {
                return Err(annotation_error(format!(
                    "span {}..{} out of range (text has {} scalars)",
                    span.start,
                    span.end,
                    target_chars.len()
                )));
            }
            let actual: String = target_chars[span.start..span.end].iter().collect();
            if actual != span.text {
                return Err(annotation_error(format!(
                    "span {}..{} text mismatch: annotation {:?} vs text {:?}",
                    span.start, span.end, span.text, actual
                )));
            }
            if span.label.is_empty() {
                return Err(annotation_error(format!(
                    "span {}..{} has an empty label",
                    span.start, span.end
                )));
            }
            spans.push(EntitySpan {
                text: span.text.clone(),
                label: span.label.clone(),
                span: (span.start, span.end),
            });
        }
        spans.sort_by_key(|s| s.span.0);
        for window in spans.windows(2) {
            if window[1].span.0 < window[0].span.1 {
                return Err(annotation_error(format!(
                    "spans {:?} and {:?} overlap",
                    window[0].span, window[1].span
                )));
            }
        }

        let key = (record.id.clone(), record.field);
        if map.insert(key, spans).is_some() {
            return Err(annotation_error("duplicate annotation record".to_string()));
        }
    }
    Ok(map)
}

/// Where downstream operations get their entity spans: the built-in
/// extractor or a loaded annotation map.
#[derive(Clone, Copy)]
pub enum EntitySource<'a> {
    Builtin { gazetteer: Option<&'a Gazetteer> },
    External(&'a AnnotationMap),
}

impl Default for EntitySource<'_> {
    fn default() -> Self {
        EntitySource::Builtin { gazetteer: None }
    }
}

impl EntitySource<'_> {
    pub fn entities(&self, pair_id: &str, field: AnnotatedField, text: &str) -> Vec<EntitySpan> {
        match self {
            EntitySource::Builtin { gazetteer } => extract_entities(text, *gazetteer),
            EntitySource::External(map) => map
                .get(&(pair_id.to_string(), field))
                .cloned()
                .unwrap_or_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span_texts(spans: &[EntitySpan]) -> Vec<&str> {
        spans.iter().map(|s| s.text.as_str()).collect()
    }

    #[test]
    fn no_entities_in_lowercase_text() {
        assert!(extract_entities("the quick brown fox", None).is_empty());
    }

    #[test]
    fn capitalized_runs_are_entities() {
        let spans = extract_entities("Stephen Hawking joined YouTube", None);
        assert_eq!(span_texts(&spans), ["Stephen Hawking", "YouTube"]);
        assert_eq!(spans[0].label, "PROPN_SPAN");
    }

    #[test]
    fn sentence_initial_single_capital_is_excluded() {
        let spans = extract_entities("The panel met in London. However, it rained.", None);
        assert_eq!(span_texts(&spans), ["London"]);
    }

    #[test]
    fn money_and_date_patterns() {
        let spans = extract_entities("It sold for £3,000 on 5 March 2017 online.", None);
        let labelled: Vec<(&str, &str)> = spans
            .iter()
            .map(|s| (s.text.as_str(), s.label.as_str()))
            .collect();
        assert_eq!(labelled, [("£3,000", "MONEY"), ("5 March 2017", "DATE")]);
    }

    #[test]
    fn standalone_numbers_are_numeric() {
        let spans = extract_entities("about 42 things in 2019", None);
        let labelled: Vec<(&str, &str)> = spans
            .iter()
            .map(|s| (s.text.as_str(), s.label.as_str()))
            .collect();
        assert_eq!(labelled, [("42", "NUMERIC"), ("2019", "NUMERIC")]);
    }

    #[test]
    fn gazetteer_wins_overlap() {
        let gazetteer = Gazetteer::new("orgs", vec!["World Health Organization".into()]);
        let spans = extract_entities(
            "Experts at the World Health Organization met.",
            Some(&gazetteer),
        );
        assert_eq!(span_texts(&spans), ["World Health Organization"]);
        assert_eq!(spans[0].label, "GAZETTEER:orgs");
    }

    #[test]
    fn gazetteer_respects_word_boundaries() {
        let gazetteer = Gazetteer::new("g", vec!["art".into()]);
        let spans = extract_entities("the artful start of art", Some(&gazetteer));
        assert_eq!(span_texts(&spans), ["art"]);
    }

    #[test]
    fn spans_are_ordered_and_disjoint() {
        let text = "Stephen Hawking paid £3,000 to YouTube on 5 March 2017. Prof. Green agreed.";
        let spans = extract_entities(text, None);
        for window in spans.windows(2) {
            assert!(window[0].span.1 <= window[1].span.0);
        }
        let chars: Vec<char> = text.chars().collect();
        for span in &spans {
            let slice: String = chars[span.span.0..span.span.1].iter().collect();
            assert_eq!(slice, span.text);
        }
    }

    #[test]
    fn entity_set_normalizes_and_dedups() {
        assert!(entity_set(&[]).is_empty());

        let spans = vec![
            EntitySpan {
                text: "YouTube.".into(),
                label: "PROPN_SPAN".into(),
                span: (0, 8),
            },
            EntitySpan {
                text: "youtube".into(),
                label: "PROPN_SPAN".into(),
                span: (10, 17),
            },
        ];
        let set = entity_set(&spans);
        assert_eq!(set.len(), 1);
        assert!(set.contains("youtube"));

        let spans = vec![
            EntitySpan {
                text: "Stephen Hawking".into(),
                label: "PROPN_SPAN".into(),
                span: (0, 15),
            },
            EntitySpan {
                text: "Gumtree".into(),
                label: "PROPN_SPAN".into(),
                span: (20, 27),
            },
        ];
        let set = entity_set(&spans);
        assert!(set.contains("stephen hawking"));
        assert!(set.contains("gumtree"));
    }

    #[test]
    fn entity_set_invariant_under_reorder_and_duplication() {
        let a = EntitySpan {
            text: "London".into(),
            label: "PROPN_SPAN".into(),
            span: (0, 6),
        };
        let b = EntitySpan {
            text: "2019".into(),
            label: "NUMERIC".into(),
            span: (10, 14),
        };
        let forward = entity_set(&[a.clone(), b.clone()]);
        let shuffled = entity_set(&[b.clone(), a.clone(), b, a]);
        assert_eq!(forward, shuffled);
    }
}

//! Batch scoring of system outputs: per-pair entity precision and ROUGE
//! plus dataset-level aggregates, entity-count distributions, and report
//! comparison.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::control::{strip_codes, CodeVocabulary};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{
    entity_count, entity_precision, rouge_l, rouge_n, rouge_tokens, MatchMode, PrecisionResult,
    RougeScore,
};
use crate::ner::{entity_set, AnnotatedField, EntitySource};

fn round_to(value: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    (value * factor).round() / factor
}

fn serialize_pct<S: Serializer>(value: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.serialize_f64(round_to(*value, 2))
}

fn serialize_mean<S: Serializer>(
    value: &Option<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    match value {
        Some(mean) => serializer.serialize_f64(round_to(*mean, 4)),
        None => serializer.serialize_none(),
    }
}

/// Scores for one pair: entity precision of the hypothesis against the
/// source document, ROUGE of the hypothesis against the reference, and
/// the hypothesis entity mention count.
#[derive(Debug, Clone, Serialize)]
pub struct PairScore {
    pub id: String,
    pub entity_precision: PrecisionResult,
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
    pub entity_count: usize,
}

/// Dataset-level means. Percentage fields hold full precision; they are
/// rounded to two decimals on serialization, matching the usual table
/// display convention.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregates {
    #[serde(serialize_with = "serialize_pct")]
    pub entity_precision: f64,
    #[serde(rename = "rouge1_f", serialize_with = "serialize_pct")]
    pub rouge1_f: f64,
    #[serde(rename = "rouge2_f", serialize_with = "serialize_pct")]
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_f", serialize_with = "serialize_pct")]
    pub rouge_l_f: f64,
    pub vacuous_count: usize,
    pub pair_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub per_pair: Vec<PairScore>,
    pub aggregates: Aggregates,
}

/// Scores every pair of a dataset. Each pair needs document, reference
/// summary, and hypothesis; control codes are stripped from documents
/// before scoring.
pub fn score_outputs(
    dataset: &Dataset,
    source: &EntitySource,
    mode: MatchMode,
    vocab: &CodeVocabulary,
) -> Result<ScoreReport> {
    for (field, getter) in [
        ("hypothesis", (|p| p.hypothesis.as_deref()) as fn(&crate::corpus::Pair) -> Option<&str>),
        ("reference_summary", |p| p.reference_summary.as_deref()),
    ] {
        let missing: Vec<String> = dataset
            .pairs
            .iter()
            .filter(|p| getter(p).map_or(true, |s| s.trim().is_empty()))
            .map(|p| p.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingText {
                field,
                ids: missing,
            });
        }
    }

    let per_pair: Vec<PairScore> = dataset
        .pairs
        .par_iter()
        .map(|pair| {
            let document = strip_codes(&pair.document, vocab).1;
            let hypothesis = pair.hypothesis.as_deref().expect("checked above");
            let reference = pair.reference_summary.as_deref().expect("checked above");

            let hyp_spans = source.entities(&pair.id, AnnotatedField::Hypothesis, hypothesis);
            let source_entities = entity_set(&source.entities(
                &pair.id,
                AnnotatedField::Document,
                &document,
            ));
            let precision =
                entity_precision(&entity_set(&hyp_spans), &document, &source_entities, mode);

            let hyp_tokens = rouge_tokens(hypothesis);
            let ref_tokens = rouge_tokens(reference);
            PairScore {
                id: pair.id.clone(),
                entity_precision: precision,
                rouge1: rouge_n(&hyp_tokens, &ref_tokens, 1).expect("n >= 1"),
                rouge2: rouge_n(&hyp_tokens, &ref_tokens, 2).expect("n >= 1"),
                rouge_l: rouge_l(&hyp_tokens, &ref_tokens),
                entity_count: hyp_spans.len(),
            }
        })
        .collect();

    let aggregates = aggregate(&per_pair);
    Ok(ScoreReport {
        per_pair,
        aggregates,
    })
}

fn aggregate(per_pair: &[PairScore]) -> Aggregates {
    let n = per_pair.len();
    let mean = |extract: fn(&PairScore) -> f64| -> f64 {
        if n == 0 {
            0.0
        } else {
            100.0 * per_pair.iter().map(extract).sum::<f64>() / n as f64
        }
    };
    Aggregates {
        entity_precision: mean(|p| p.entity_precision.value),
        rouge1_f: mean(|p| p.rouge1.f1),
        rouge2_f: mean(|p| p.rouge2.f1),
        rouge_l_f: mean(|p| p.rouge_l.f1),
        vacuous_count: per_pair.iter().filter(|p| p.entity_precision.vacuous).count(),
        pair_count: n,
    }
}

/// Entity-count distribution over a collection of texts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub counts: BTreeMap<usize, usize>,
    /// Undefined (None) for an empty input; rounded to 4 decimals on
    /// serialization.
    #[serde(serialize_with = "serialize_mean")]
    pub mean: Option<f64>,
}

pub fn histogram_from_counts(counts: impl IntoIterator<Item = usize>) -> Histogram {
    let mut frequency: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    let mut n = 0usize;
    for count in counts {
        *frequency.entry(count).or_insert(0) += 1;
        total += count;
        n += 1;
    }
    Histogram {
        counts: frequency,
        mean: (n > 0).then(|| total as f64 / n as f64),
    }
}

/// Histogram of entity mention counts per text, via the built-in
/// extractor.
pub fn entity_count_histogram<T: AsRef<str> + Sync>(texts: &[T]) -> Histogram {
    let counts: Vec<usize> = texts
        .par_iter()
        .map(|t| entity_count(t.as_ref()))
        .collect();
    histogram_from_counts(counts)
}

/// Per-pair score deltas (b − a), in fraction space.
#[derive(Debug, Clone, Serialize)]
pub struct PairDelta {
    pub id: String,
    pub entity_precision: f64,
    pub rouge1_f: f64,
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_f")]
    pub rouge_l_f: f64,
    pub entity_count: i64,
}

/// Aggregate and per-pair differences between two score reports.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaReport {
    /// Aggregate deltas in percentage points (b − a).
    #[serde(serialize_with = "serialize_pct")]
    pub entity_precision: f64,
    #[serde(rename = "rouge1_f", serialize_with = "serialize_pct")]
    pub rouge1_f: f64,
    #[serde(rename = "rouge2_f", serialize_with = "serialize_pct")]
    pub rouge2_f: f64,
    #[serde(rename = "rougeL_f", serialize_with = "serialize_pct")]
    pub rouge_l_f: f64,
    pub per_pair: Vec<PairDelta>,
}

/// Compares two reports covering the same pair ids; deltas are b − a.
pub fn compare_reports(a: &ScoreReport, b: &ScoreReport) -> Result<DeltaReport> {
    let by_id: HashMap<&str, &PairScore> =
        a.per_pair.iter().map(|p| (p.id.as_str(), p)).collect();
    let missing_in_a: Vec<&str> = b
        .per_pair
        .iter()
        .map(|p| p.id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing_in_a.is_empty() || a.per_pair.len() != b.per_pair.len() {
        let b_ids: std::collections::HashSet<&str> =
            b.per_pair.iter().map(|p| p.id.as_str()).collect();
        let missing_in_b: Vec<&str> = a
            .per_pair
            .iter()
            .map(|p| p.id.as_str())
            .filter(|id| !b_ids.contains(id))
            .collect();
        return Err(Error::validation(format!(
            "reports do not cover the same pair ids (missing in first: [{}]; missing in second: [{}])",
            missing_in_a.join(", "),
            missing_in_b.join(", ")
        )));
    }

    let per_pair = b
        .per_pair
        .iter()
        .map(|score_b| {
            let score_a = by_id[score_b.id.as_str()];
            PairDelta {
                id: score_b.id.clone(),
                entity_precision: score_b.entity_precision.value - score_a.entity_precision.value,
                rouge1_f: score_b.rouge1.f1 - score_a.rouge1.f1,
                rouge2_f: score_b.rouge2.f1 - score_a.rouge2.f1,
                rouge_l_f: score_b.rouge_l.f1 - score_a.rouge_l.f1,
                entity_count: score_b.entity_count as i64 - score_a.entity_count as i64,
            }
        })
        .collect();

    Ok(DeltaReport {
        entity_precision: b.aggregates.entity_precision - a.aggregates.entity_precision,
        rouge1_f: b.aggregates.rouge1_f - a.aggregates.rouge1_f,
        rouge2_f: b.aggregates.rouge2_f - a.aggregates.rouge2_f,
        rouge_l_f: b.aggregates.rouge_l_f - a.aggregates.rouge_l_f,
        per_pair,
    })
}

//! Target-profiled pseudo document/summary pairs from Wikipedia article
//! text, for controllable intermediate fine-tuning.
//!
//! For each article the leading sentences become a pseudo summary and
//! the following sentences a pseudo document. A pair is kept when its
//! greedy extractive-oracle ROUGE-1 score lands within the profile's
//! abstractiveness band, so the generated subset matches the target
//! dataset's characteristics. No RNG anywhere: generation is a pure
//! function of (dump bytes, profiles, cap).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Dataset, Pair};
use crate::error::{Error, Result};
use crate::metrics::{f_measure, rouge_tokens};
use crate::text::{normalize_token, slice_scalars, split_sentences, Sentence};

/// A target dataset's characteristics driving pseudo-pair generation:
/// summary length and document length in sentences, plus the accepted
/// extractive-oracle ROUGE-1 band `abstractiveness ± tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetProfile {
    pub name: String,
    pub summary_sents: usize,
    pub doc_sents: usize,
    pub abstractiveness: f64,
    pub tolerance: f64,
    /// Optional per-profile cap overriding the builder's default.
    pub max_pairs: Option<usize>,
}

impl TargetProfile {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-')
        {
            return Err(Error::parameter(format!(
                "profile name {:?} must match [A-Za-z0-9-]+",
                self.name
            )));
        }
        if self.summary_sents < 1 || self.doc_sents < 1 {
            return Err(Error::parameter(format!(
                "profile {:?}: summary_sents and doc_sents must be >= 1",
                self.name
            )));
        }
        if !self.abstractiveness.is_finite()
            || self.abstractiveness <= 0.0
            || self.abstractiveness > 1.0
        {
            return Err(Error::parameter(format!(
                "profile {:?}: abstractiveness must be in (0, 1]",
                self.name
            )));
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return Err(Error::parameter(format!(
                "profile {:?}: tolerance must be >= 0",
                self.name
            )));
        }
        Ok(())
    }
}

/// One generated pseudo training example.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoPair {
    pub article_title: String,
    pub pseudo_summary: String,
    pub pseudo_document: String,
    pub oracle_score: f64,
    pub profile_name: String,
}

/// A plain-text article from the dump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub title: String,
    pub text: String,
}

static INLINE_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"==+[^=\n]*==+").unwrap());
static TEMPLATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{[^{}]*\}\}").unwrap());

/// Light markup scrub for pre-extracted dump text: heading lines and
/// inline `== … ==` headings are dropped, `[[`/`]]` link brackets are
/// stripped (keeping the inner text), `{{…}}` templates are removed, and
/// whitespace is collapsed.
pub fn scrub_markup(text: &str) -> String {
    let mut cleaned = Vec::new();
    for line in text.lines() {
        if line.trim_start().starts_with("==") {
            continue;
        }
        let mut line = INLINE_HEADING.replace_all(line, " ").into_owned();
        loop {
            let next = TEMPLATE.replace_all(&line, " ").into_owned();
            if next == line {
                break;
            }
            line = next;
        }
        let line = line
            .replace("[[", "")
            .replace("]]", "")
            .replace("{{", "")
            .replace("}}", "");
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if !collapsed.is_empty() {
            cleaned.push(collapsed);
        }
    }
    cleaned.join(" ")
}

/// Streams `{"title", "text"}` records from a JSONL dump without loading
/// the file into memory. Malformed lines are skipped and counted, not
/// fatal — dumps are large and noisy.
pub struct ArticleReader {
    lines: Lines<BufReader<File>>,
    warnings: usize,
}

pub fn read_articles(path: &Path) -> Result<ArticleReader> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ArticleReader {
        lines: BufReader::new(file).lines(),
        warnings: 0,
    })
}

impl ArticleReader {
    /// Number of malformed lines skipped so far.
    pub fn warnings(&self) -> usize {
        self.warnings
    }
}

impl Iterator for ArticleReader {
    type Item = Article;

    fn next(&mut self) -> Option<Article> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(_) => {
                    self.warnings += 1;
                    return None;
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let Ok(value) = serde_json::from_str::<serde_json::Value>(&line) else {
                self.warnings += 1;
                continue;
            };
            let (Some(title), Some(text)) = (
                value.get("title").and_then(|v| v.as_str()),
                value.get("text").and_then(|v| v.as_str()),
            ) else {
                self.warnings += 1;
                continue;
            };
            return Some(Article {
                title: title.nfc().collect(),
                text: scrub_markup(&text.nfc().collect::<String>()),
            });
        }
    }
}

/// A sliced candidate before oracle filtering: the article's first
/// `summary_sents` sentences and the following `doc_sents` sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoCandidate {
    pub pseudo_summary: String,
    pub pseudo_document: String,
}

/// Slices an article into a pseudo summary and pseudo document, or
/// nothing if the article is too short.
pub fn make_pseudo_pair(article_text: &str, profile: &TargetProfile) -> Option<PseudoCandidate> {
    let sentences = split_sentences(article_text);
    let needed = profile.summary_sents + profile.doc_sents;
    if sentences.len() < needed {
        return None;
    }
    let summary_end = sentences[profile.summary_sents - 1].span.1;
    let doc_start = sentences[profile.summary_sents].span.0;
    let doc_end = sentences[needed - 1].span.1;
    Some(PseudoCandidate {
        pseudo_summary: slice_scalars(article_text, sentences[0].span.0, summary_end),
        pseudo_document: slice_scalars(article_text, doc_start, doc_end),
    })
}

/// Normalized ROUGE tokens of one sentence.
pub fn sentence_tokens(sentence: &Sentence) -> Vec<String> {
    sentence
        .tokens
        .iter()
        .map(|t| normalize_token(&t.text))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Result of the greedy extractive oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub score: f64,
    /// Indices of selected sentences, ascending.
    pub selected: Vec<usize>,
}

/// Greedy extractive oracle: repeatedly adds the sentence that most
/// improves ROUGE-1 F of the selection against the target summary,
/// stopping when no addition improves it. Ties break to the lowest
/// index. The result upper-bounds what verbatim sentence extraction can
/// achieve, which is the abstractiveness measure.
pub fn extractive_oracle_rouge1(
    doc_sentences: &[Vec<String>],
    summary_tokens: &[String],
) -> OracleResult {
    let mut summary_counts: HashMap<&str, usize> = HashMap::new();
    for token in summary_tokens {
        *summary_counts.entry(token.as_str()).or_insert(0) += 1;
    }
    let summary_len = summary_tokens.len();

    let mut selected_counts: HashMap<&str, usize> = HashMap::new();
    let mut matches = 0usize;
    let mut length = 0usize;
    let mut score = 0.0f64;
    let mut used = vec![false; doc_sentences.len()];
    let mut selected = Vec::new();

    loop {
        let mut best: Option<(usize, f64, usize)> = None;
        for (i, sentence) in doc_sentences.iter().enumerate() {
            if used[i] {
                continue;
            }
            let mut local: HashMap<&str, usize> = HashMap::new();
            let mut gain = 0usize;
            for token in sentence {
                let have = selected_counts.get(token.as_str()).copied().unwrap_or(0)
                    + local.get(token.as_str()).copied().unwrap_or(0);
                if have < summary_counts.get(token.as_str()).copied().unwrap_or(0) {
                    gain += 1;
                }
                *local.entry(token.as_str()).or_insert(0) += 1;
            }
            let candidate_f = rouge1_f(matches + gain, length + sentence.len(), summary_len);
            if best.is_none_or(|(_, best_f, _)| candidate_f > best_f) {
                best = Some((i, candidate_f, gain));
            }
        }
        match best {
            Some((i, candidate_f, gain)) if candidate_f > score => {
                used[i] = true;
                selected.push(i);
                for token in &doc_sentences[i] {
                    *selected_counts.entry(token.as_str()).or_insert(0) += 1;
                }
                matches += gain;
                length += doc_sentences[i].len();
                score = candidate_f;
            }
            _ => break,
        }
    }
    selected.sort_unstable();
    OracleResult { score, selected }
}

fn rouge1_f(matches: usize, hyp_len: usize, ref_len: usize) -> f64 {
    let precision = if hyp_len == 0 {
        0.0
    } else {
        matches as f64 / hyp_len as f64
    };
    let recall = if ref_len == 0 {
        0.0
    } else {
        matches as f64 / ref_len as f64
    };
    f_measure(precision, recall)
}

/// Per-profile generation counters.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ProfileReport {
    pub name: String,
    pub candidates: usize,
    pub kept: usize,
    pub skipped_insufficient_sentences: usize,
    pub skipped_outside_band: usize,
    pub skipped_cap_reached: usize,
}

/// Counters for one generation run.
#[derive(Debug, Clone, Serialize)]
pub struct GenReport {
    pub articles_read: usize,
    pub malformed_lines: usize,
    pub profiles: Vec<ProfileReport>,
}

enum Outcome {
    Insufficient,
    OutsideBand,
    InBand(PseudoCandidate, f64),
}

fn evaluate_article(article: &Article, profile: &TargetProfile) -> Outcome {
    let Some(candidate) = make_pseudo_pair(&article.text, profile) else {
        return Outcome::Insufficient;
    };
    let doc_sentence_tokens: Vec<Vec<String>> = split_sentences(&candidate.pseudo_document)
        .iter()
        .map(sentence_tokens)
        .collect();
    let summary_tokens = rouge_tokens(&candidate.pseudo_summary);
    let oracle = extractive_oracle_rouge1(&doc_sentence_tokens, &summary_tokens);
    if (oracle.score - profile.abstractiveness).abs() <= profile.tolerance {
        Outcome::InBand(candidate, oracle.score)
    } else {
        Outcome::OutsideBand
    }
}

const BATCH_SIZE: usize = 64;

/// Streams the dump once and builds the intermediate corpus: for each
/// article × profile, slice, score with the oracle, and keep pairs whose
/// oracle score lies within the profile band, up to the per-profile cap
/// (first accepted wins). Output is ordered by (profile, article stream
/// position) so results do not depend on worker count.
pub fn build_intermediate_corpus(
    dump: &Path,
    profiles: &[TargetProfile],
    max_per_profile: usize,
) -> Result<(Dataset, GenReport)> {
    if profiles.is_empty() {
        return Err(Error::parameter("at least one target profile is required"));
    }
    for profile in profiles {
        profile.validate()?;
    }
    {
        let mut names: Vec<&str> = profiles.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != profiles.len() {
            return Err(Error::parameter("profile names must be unique"));
        }
    }

    let caps: Vec<usize> = profiles
        .iter()
        .map(|p| p.max_pairs.unwrap_or(max_per_profile))
        .collect();
    let mut reader = read_articles(dump)?;
    let mut kept: Vec<Vec<PseudoPair>> = vec![Vec::new(); profiles.len()];
    let mut reports: Vec<ProfileReport> = profiles
        .iter()
        .map(|p| ProfileReport {
            name: p.name.clone(),
            ..ProfileReport::default()
        })
        .collect();
    let mut articles_read = 0usize;

    loop {
        if kept.iter().zip(&caps).all(|(k, cap)| k.len() >= *cap) {
            break;
        }
        let batch: Vec<Article> = reader.by_ref().take(BATCH_SIZE).collect();
        if batch.is_empty() {
            break;
        }
        articles_read += batch.len();

        let outcomes: Vec<Vec<Outcome>> = batch
            .par_iter()
            .map(|article| {
                profiles
                    .iter()
                    .map(|profile| evaluate_article(article, profile))
                    .collect()
            })
            .collect();

        for (article, article_outcomes) in batch.iter().zip(outcomes) {
            for (j, outcome) in article_outcomes.into_iter().enumerate() {
                match outcome {
                    Outcome::Insufficient => {
                        reports[j].skipped_insufficient_sentences += 1;
                    }
                    Outcome::OutsideBand => {
                        reports[j].candidates += 1;
                        reports[j].skipped_outside_band += 1;
                    }
                    Outcome::InBand(candidate, oracle_score) => {
                        reports[j].candidates += 1;
                        if kept[j].len() >= caps[j] {
                            reports[j].skipped_cap_reached += 1;
                        } else {
                            kept[j].push(PseudoPair {
                                article_title: article.title.clone(),
                                pseudo_summary: candidate.pseudo_summary,
                                pseudo_document: candidate.pseudo_document,
                                oracle_score,
                                profile_name: profiles[j].name.clone(),
                            });
                        }
                    }
                }
            }
        }
    }

    for (report, kept_pairs) in reports.iter_mut().zip(&kept) {
        report.kept = kept_pairs.len();
    }

    let mut pairs = Vec::new();
    for (profile, kept_pairs) in profiles.iter().zip(kept) {
        for (seq, pseudo) in kept_pairs.into_iter().enumerate() {
            let mut pair = Pair::new(
                format!("{}-{:06}", profile.name, seq + 1),
                pseudo.pseudo_document,
            )
            .with_reference(pseudo.pseudo_summary);
            pair.codes = vec![format!("<T-{}>", profile.name)];
            pair.meta
                .insert("article_title".to_string(), pseudo.article_title);
            pair.meta
                .insert("oracle_score".to_string(), format!("{:.6}", pseudo.oracle_score));
            pair.meta
                .insert("profile".to_string(), profile.name.clone());
            pairs.push(pair);
        }
    }
    let dataset = Dataset::new("intermediate", pairs)?;
    let report = GenReport {
        articles_read,
        malformed_lines: reader.warnings(),
        profiles: reports,
    };
    Ok((dataset, report))
}

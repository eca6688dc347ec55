//! Balanced quantization of faithfulness scores into k bins, the
//! control-code vocabulary, and code prepending/stripping for training
//! and inference sets.
//!
//! A training pair's entity coverage precision is quantized into one of
//! k bins whose boundaries are chosen so each bin holds roughly the same
//! number of examples. Each bin is named by a faithfulness code token
//! (`<FF-low>`, `<FF-mid>`, `<FF-high>` for k = 3); target codes
//! (`<T-xsum>`) mark target-specific pseudo data and stack after the
//! faithfulness code.

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{entity_precision, MatchMode};
use crate::ner::{entity_set, AnnotatedField, EntitySource};

/// True iff `s` matches the code token grammar `"<" NAME ">"` with
/// NAME = `[A-Za-z0-9-]+`.
pub fn is_code_token(s: &str) -> bool {
    let Some(name) = s.strip_prefix('<').and_then(|s| s.strip_suffix('>')) else {
        return false;
    };
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

/// Whether a code conditions faithfulness (C_i) or target style (E_i).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Faithfulness,
    Target,
}

/// A special token prepended to documents. The name prefix fixes the
/// kind: `FF-*` is a faithfulness code, `T-*` a target code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlCode {
    token: String,
    kind: CodeKind,
}

impl ControlCode {
    /// Accepts either `<FF-high>` or the bare name `FF-high`.
    pub fn parse(s: &str) -> Result<Self> {
        let name = s
            .strip_prefix('<')
            .and_then(|rest| rest.strip_suffix('>'))
            .unwrap_or(s);
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::parameter(format!(
                "control code {s:?} does not match the token grammar <[A-Za-z0-9-]+>"
            )));
        }
        let kind = if name.strip_prefix("FF-").is_some_and(|rest| !rest.is_empty()) {
            CodeKind::Faithfulness
        } else if name.strip_prefix("T-").is_some_and(|rest| !rest.is_empty()) {
            CodeKind::Target
        } else {
            return Err(Error::parameter(format!(
                "control code {s:?} must start with FF- (faithfulness) or T- (target)"
            )));
        };
        Ok(ControlCode {
            token: format!("<{name}>"),
            kind,
        })
    }

    /// The full token including angle brackets, e.g. `<FF-high>`.
    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }
}

impl std::fmt::Display for ControlCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.token)
    }
}

/// The active set of code tokens: k faithfulness codes ordered lowest to
/// highest bin, plus any target codes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodeVocabulary {
    faithfulness: Vec<ControlCode>,
    targets: Vec<ControlCode>,
}

impl CodeVocabulary {
    pub fn new(faithfulness_tokens: &[String], target_tokens: &[String]) -> Result<Self> {
        let mut vocab = CodeVocabulary::default();
        for token in faithfulness_tokens {
            let code = ControlCode::parse(token)?;
            if code.kind() != CodeKind::Faithfulness {
                return Err(Error::parameter(format!(
                    "{token:?} is not a faithfulness (FF-*) code"
                )));
            }
            vocab.insert(code)?;
        }
        for token in target_tokens {
            let code = ControlCode::parse(token)?;
            if code.kind() != CodeKind::Target {
                return Err(Error::parameter(format!(
                    "{token:?} is not a target (T-*) code"
                )));
            }
            vocab.insert(code)?;
        }
        Ok(vocab)
    }

    fn insert(&mut self, code: ControlCode) -> Result<()> {
        if self.lookup(code.token()).is_some() {
            return Err(Error::parameter(format!(
                "duplicate code token {:?}",
                code.token()
            )));
        }
        match code.kind() {
            CodeKind::Faithfulness => self.faithfulness.push(code),
            CodeKind::Target => self.targets.push(code),
        }
        Ok(())
    }

    /// Registers an additional target code (idempotent).
    pub fn add_target(&mut self, name_or_token: &str) -> Result<()> {
        let code = ControlCode::parse(name_or_token)?;
        if code.kind() != CodeKind::Target {
            return Err(Error::parameter(format!(
                "{name_or_token:?} is not a target (T-*) code"
            )));
        }
        if self.lookup(code.token()).is_none() {
            self.targets.push(code);
        }
        Ok(())
    }

    /// Number of faithfulness bins.
    pub fn k(&self) -> usize {
        self.faithfulness.len()
    }

    pub fn faithfulness_codes(&self) -> &[ControlCode] {
        &self.faithfulness
    }

    pub fn target_codes(&self) -> &[ControlCode] {
        &self.targets
    }

    /// The faithfulness code for a bin index (0 = lowest).
    pub fn faithfulness_code(&self, bin: usize) -> Option<&ControlCode> {
        self.faithfulness.get(bin)
    }

    pub fn lookup(&self, token: &str) -> Option<&ControlCode> {
        self.faithfulness
            .iter()
            .chain(self.targets.iter())
            .find(|c| c.token() == token)
    }

    pub fn tokens(&self) -> Vec<String> {
        self.faithfulness
            .iter()
            .chain(self.targets.iter())
            .map(|c| c.token().to_string())
            .collect()
    }
}

/// Builds the code vocabulary for k bins. k = 3 uses the canonical
/// low/mid/high names; other k values use numbered codes.
pub fn make_code_vocab(k: usize, target_names: &[String]) -> Result<CodeVocabulary> {
    if k < 2 {
        return Err(Error::parameter(format!("k must be >= 2, got {k}")));
    }
    let faithfulness: Vec<String> = if k == 3 {
        ["<FF-low>", "<FF-mid>", "<FF-high>"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        (0..k).map(|i| format!("<FF-{i}>")).collect()
    };
    let targets: Vec<String> = target_names
        .iter()
        .map(|name| {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                Err(Error::parameter(format!(
                    "target name {name:?} must match [A-Za-z0-9-]+"
                )))
            } else {
                Ok(format!("<T-{name}>"))
            }
        })
        .collect::<Result<_>>()?;
    CodeVocabulary::new(&faithfulness, &targets)
}

/// The k-1 ascending cut points defining the faithfulness bins. Bin 0 is
/// `[0, cut_1)`, bin j is `[cut_j, cut_{j+1})`, and the top bin is
/// `[cut_{k-1}, 1]`; cuts are lower-inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct BinBoundaries {
    cuts: Vec<f64>,
    k: usize,
}

impl BinBoundaries {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::parameter("need at least one cut (k >= 2)"));
        }
        for cut in &cuts {
            if !cut.is_finite() || *cut <= 0.0 || *cut >= 1.0 {
                return Err(Error::parameter(format!(
                    "cut {cut} is outside the open interval (0, 1)"
                )));
            }
        }
        for window in cuts.windows(2) {
            if window[1] <= window[0] {
                return Err(Error::parameter(format!(
                    "cuts must be strictly ascending, got {} then {}",
                    window[0], window[1]
                )));
            }
        }
        let k = cuts.len() + 1;
        Ok(BinBoundaries { cuts, k })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Chooses cuts so each bin holds roughly the same number of scores:
/// cut j is the sorted score at rank `floor(j * N / k)`. Cuts pushed
/// together by duplicate scores advance to the next larger distinct
/// score; if that is impossible the distribution is degenerate.
pub fn compute_balanced_boundaries(scores: &[f64], k: usize) -> Result<BinBoundaries> {
    if k < 2 {
        return Err(Error::parameter(format!("k must be >= 2, got {k}")));
    }
    if scores.len() < k {
        return Err(Error::parameter(format!(
            "need at least k = {k} scores, got {}",
            scores.len()
        )));
    }
    for score in scores {
        if !score.is_finite() || !(0.0..=1.0).contains(score) {
            return Err(Error::parameter(format!(
                "score {score} is outside [0, 1]"
            )));
        }
    }

    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("scores are finite"));

    let mut distinct = 1;
    for window in sorted.windows(2) {
        if window[1] > window[0] {
            distinct += 1;
        }
    }
    if distinct < k {
        return Err(Error::DegenerateDistribution(format!(
            "only {distinct} distinct scores for k = {k} bins"
        )));
    }

    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..k).map(|j| sorted[j * n / k]).collect();
    let mut previous = 0.0;
    for cut in &mut cuts {
        if *cut <= previous {
            let next = sorted.partition_point(|s| *s <= previous);
            if next == n {
                return Err(Error::DegenerateDistribution(format!(
                    "no score above {previous} left to separate the bins"
                )));
            }
            *cut = sorted[next];
        }
        previous = *cut;
    }
    if cuts.last().is_some_and(|c| *c >= 1.0) {
        return Err(Error::DegenerateDistribution(
            "top cut reached 1.0; the highest bin would be empty of range".to_string(),
        ));
    }
    BinBoundaries::new(cuts)
}

/// Bin index in `[0, k-1]` for a score under lower-inclusive cuts.
pub fn assign_bin(score: f64, boundaries: &BinBoundaries) -> Result<usize> {
    if !score.is_finite() || !(0.0..=1.0).contains(&score) {
        return Err(Error::parameter(format!(
            "score {score} is outside [0, 1]"
        )));
    }
    Ok(boundaries.cuts.partition_point(|cut| *cut <= score))
}

/// Sorts codes into canonical order: faithfulness codes first, then
/// target codes, stable within each kind.
pub fn canonical_order(codes: &[ControlCode]) -> Vec<ControlCode> {
    let mut sorted = codes.to_vec();
    sorted.sort_by_key(|c| c.kind());
    sorted
}

fn is_canonical(codes: &[ControlCode]) -> bool {
    codes.windows(2).all(|w| w[0].kind() <= w[1].kind())
}

/// Prepends code tokens to a document, single-space separated. Codes
/// must already be in canonical order (see [`canonical_order`]).
pub fn prepend_codes(document: &str, codes: &[ControlCode]) -> Result<String> {
    if !is_canonical(codes) {
        return Err(Error::parameter(
            "codes must be in canonical order: faithfulness before target",
        ));
    }
    if codes.is_empty() {
        return Ok(document.to_string());
    }
    let mut out = String::new();
    for code in codes {
        out.push_str(code.token());
        out.push(' ');
    }
    out.push_str(document);
    Ok(out)
}

/// Greedily consumes leading vocabulary tokens (each followed by at most
/// one separator space) and returns them plus the remaining document.
/// Unknown leading `<...>` tokens are left in the document.
pub fn strip_codes(text: &str, vocab: &CodeVocabulary) -> (Vec<ControlCode>, String) {
    let mut rest = text;
    let mut codes = Vec::new();
    while rest.starts_with('<') {
        let Some(end) = rest.find('>') else { break };
        let Some(code) = vocab.lookup(&rest[..=end]) else {
            break;
        };
        codes.push(code.clone());
        rest = &rest[end + 1..];
        rest = rest.strip_prefix(' ').unwrap_or(rest);
    }
    (codes, rest.to_string())
}

/// How prepare_training_set picks its bin boundaries.
#[derive(Debug, Clone)]
pub enum Binning {
    /// Derive balanced boundaries from the observed scores.
    Auto { k: usize },
    /// Use fixed cuts (e.g. published per-dataset boundaries).
    Fixed(BinBoundaries),
}

/// Result of preparing a training set: the coded dataset, the boundaries
/// used, and how many pairs landed in each bin.
#[derive(Debug, Clone)]
pub struct TrainingPreparation {
    pub dataset: Dataset,
    pub boundaries: BinBoundaries,
    pub bin_counts: Vec<usize>,
}

/// Boundary report emitted alongside a prepared training set.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub k: usize,
    pub cuts: Vec<f64>,
    pub bin_counts: Vec<usize>,
    pub code_tokens: Vec<String>,
}

impl TrainingPreparation {
    pub fn report(&self, vocab: &CodeVocabulary) -> BoundaryReport {
        BoundaryReport {
            k: self.boundaries.k(),
            cuts: self.boundaries.cuts().to_vec(),
            bin_counts: self.bin_counts.clone(),
            code_tokens: vocab.tokens(),
        }
    }
}

/// Computes entity coverage precision of each reference summary against
/// its document, quantizes the scores, and attaches the bin's
/// faithfulness code to each pair. Never drops or reorders pairs.
/// Target codes already attached (pseudo data) are kept after the
/// faithfulness code; stale faithfulness codes are replaced.
pub fn prepare_training_set(
    dataset: &Dataset,
    entity_source: &EntitySource,
    binning: Binning,
    mode: MatchMode,
    vocab: &CodeVocabulary,
) -> Result<TrainingPreparation> {
    let missing: Vec<String> = dataset
        .pairs
        .iter()
        .filter(|p| p.reference_summary.as_deref().map_or(true, |s| s.trim().is_empty()))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingText {
            field: "reference_summary",
            ids: missing,
        });
    }

    let scores: Vec<f64> = dataset
        .pairs
        .par_iter()
        .map(|pair| {
            let reference = pair
                .reference_summary
                .as_deref()
                .expect("checked above");
            let hyp_set = entity_set(&entity_source.entities(
                &pair.id,
                AnnotatedField::ReferenceSummary,
                reference,
            ));
            let source_set = entity_set(&entity_source.entities(
                &pair.id,
                AnnotatedField::Document,
                &pair.document,
            ));
            entity_precision(&hyp_set, &pair.document, &source_set, mode).value
        })
        .collect();

    let boundaries = match binning {
        Binning::Auto { k } => compute_balanced_boundaries(&scores, k)?,
        Binning::Fixed(fixed) => fixed,
    };
    if vocab.k() != boundaries.k() {
        return Err(Error::parameter(format!(
            "vocabulary has {} faithfulness codes but boundaries define {} bins",
            vocab.k(),
            boundaries.k()
        )));
    }

    let mut bin_counts = vec![0usize; boundaries.k()];
    let mut pairs = Vec::with_capacity(dataset.pairs.len());
    for (pair, score) in dataset.pairs.iter().zip(&scores) {
        let bin = assign_bin(*score, &boundaries)?;
        bin_counts[bin] += 1;
        let faithfulness = vocab
            .faithfulness_code(bin)
            .expect("bin index within vocabulary")
            .token()
            .to_string();
        let mut codes = vec![faithfulness];
        codes.extend(
            pair.codes
                .iter()
                .filter(|c| {
                    ControlCode::parse(c.as_str())
                        .is_ok_and(|code| code.kind() == CodeKind::Target)
                })
                .cloned(),
        );
        let mut coded = pair.clone();
        coded.codes = codes;
        pairs.push(coded);
    }

    Ok(TrainingPreparation {
        dataset: Dataset {
            name: dataset.name.clone(),
            pairs,
        },
        boundaries,
        bin_counts,
    })
}

/// Attaches the chosen code (plus an optional stacked target code) to
/// every pair of an inference set.
pub fn prepare_inference_set(
    dataset: &Dataset,
    code: &ControlCode,
    extra: Option<&ControlCode>,
    vocab: &CodeVocabulary,
) -> Result<Dataset> {
    if vocab.lookup(code.token()).is_none() {
        return Err(Error::parameter(format!(
            "code {} is not in the active vocabulary",
            code.token()
        )));
    }
    if let Some(extra) = extra {
        if extra.kind() != CodeKind::Target {
            return Err(Error::parameter(format!(
                "extra code {} must be a target (T-*) code",
                extra.token()
            )));
        }
        if vocab.lookup(extra.token()).is_none() {
            return Err(Error::parameter(format!(
                "code {} is not in the active vocabulary",
                extra.token()
            )));
        }
    }

    let mut codes = vec![code.clone()];
    codes.extend(extra.cloned());
    let tokens: Vec<String> = canonical_order(&codes)
        .iter()
        .map(|c| c.token().to_string())
        .collect();

    let pairs = dataset
        .pairs
        .iter()
        .map(|pair| {
            let mut coded = pair.clone();
            coded.codes = tokens.clone();
            coded
        })
        .collect();
    Ok(Dataset {
        name: dataset.name.clone(),
        pairs,
    })
}

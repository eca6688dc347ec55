//! Corpus-side entity coverage control for abstractive summarization.
//!
//! This crate prepares training and evaluation data for
//! faithfulness-controlled summarization:
//!
//! * **corpus** — the JSONL data model for document/summary pairs;
//! * **text** — deterministic tokenization and sentence splitting;
//! * **ner** — rule-based entity extraction and external annotations;
//! * **metrics** — entity coverage precision and ROUGE-1/2/L;
//! * **control** — balanced score binning and control-code handling;
//! * **wikigen** — Wikipedia-derived pseudo pairs for intermediate
//!   fine-tuning;
//! * **eval** — batch scoring and aggregate reports.
//!
//! Everything is deterministic: no RNG, no model inference, and results
//! are independent of worker count.

pub mod control;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod ner;
pub mod text;
pub mod wikigen;

pub use control::{
    assign_bin, canonical_order, compute_balanced_boundaries, make_code_vocab, prepare_inference_set,
    prepare_training_set, prepend_codes, strip_codes, BinBoundaries, Binning, BoundaryReport,
    CodeKind, CodeVocabulary, ControlCode, TrainingPreparation,
};
pub use corpus::{load_dataset, write_dataset, DataFormat, Dataset, Pair};
pub use error::{Error, Result};
pub use eval::{
    compare_reports, entity_count_histogram, histogram_from_counts, score_outputs, Aggregates,
    DeltaReport, Histogram, PairScore, ScoreReport,
};
pub use metrics::{
    entity_count, entity_precision, rouge_l, rouge_n, rouge_tokens, MatchMode, PrecisionResult,
    RougeScore,
};
pub use ner::{
    entity_set, extract_entities, load_external_annotations, AnnotatedField, AnnotationMap,
    EntitySet, EntitySource, EntitySpan, Gazetteer,
};
pub use text::{
    normalize_token, normalize_words, split_sentences, split_sentences_with, tokenize,
    Abbreviations, Sentence, Token,
};
pub use wikigen::{
    build_intermediate_corpus, extractive_oracle_rouge1, make_pseudo_pair, read_articles,
    scrub_markup, Article, ArticleReader, GenReport, OracleResult, ProfileReport, PseudoCandidate,
    PseudoPair, TargetProfile,
};

//! Canonical data model and line-delimited I/O for documents, summaries,
//! and datasets.
//!
//! The on-disk format is JSON lines, one record per line:
//! `{"id", "codes", "document", "reference_summary"?, "hypothesis"?, "meta"}`.
//! Unknown input fields are preserved in `meta`. Text fields are NFC
//! normalized at load time so offsets and comparisons operate on a
//! canonical form.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use unicode_normalization::UnicodeNormalization;

use crate::control;
use crate::error::{Error, Result};

/// One training or evaluation example: a source document plus optional
/// reference summary and system hypothesis.
///
/// Field declaration order matches the on-disk record order: id, codes,
/// document, reference_summary, hypothesis, meta.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pair {
    pub id: String,
    pub codes: Vec<String>,
    pub document: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_summary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<String>,
    pub meta: BTreeMap<String, String>,
}

impl Pair {
    pub fn new(id: impl Into<String>, document: impl Into<String>) -> Self {
        Pair {
            id: id.into(),
            codes: Vec::new(),
            document: document.into(),
            reference_summary: None,
            hypothesis: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference_summary = Some(reference.into());
        self
    }

    pub fn with_hypothesis(mut self, hypothesis: impl Into<String>) -> Self {
        self.hypothesis = Some(hypothesis.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation("pair id must be non-empty"));
        }
        if self.document.trim().is_empty() {
            return Err(Error::validation(format!(
                "pair {:?}: document is empty",
                self.id
            )));
        }
        for code in &self.codes {
            if !control::is_code_token(code) {
                return Err(Error::validation(format!(
                    "pair {:?}: code {code:?} does not match the control-code grammar",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// An ordered collection of pairs with unique ids. Order is preserved
/// exactly as read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub pairs: Vec<Pair>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, pairs: Vec<Pair>) -> Result<Self> {
        let dataset = Dataset {
            name: name.into(),
            pairs,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (idx, pair) in self.pairs.iter().enumerate() {
            pair.validate()?;
            if let Some(first) = seen.insert(pair.id.as_str(), idx) {
                return Err(Error::DuplicateId {
                    id: pair.id.clone(),
                    first_line: first + 1,
                    second_line: idx + 1,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Supported on-disk dataset formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataFormat {
    #[default]
    Jsonl,
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

const KNOWN_FIELDS: &[&str] = &[
    "id",
    "codes",
    "document",
    "reference_summary",
    "hypothesis",
    "meta",
];

/// Loads a JSONL dataset, preserving record order. Unknown fields are
/// kept in `meta`; non-string values are stored as their JSON text.
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    let DataFormat::Jsonl = format;
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut pairs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            return Err(malformed(path, line_no, "empty line"));
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| malformed(path, line_no, format!("invalid JSON: {e}")))?;
        let pair = parse_record(value, path, line_no)?;
        if let Some(&first) = seen.get(&pair.id) {
            return Err(Error::DuplicateId {
                id: pair.id,
                first_line: first,
                second_line: line_no,
            });
        }
        seen.insert(pair.id.clone(), line_no);
        pairs.push(pair);
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(Dataset { name, pairs })
}

fn parse_record(value: serde_json::Value, path: &Path, line_no: usize) -> Result<Pair> {
    let serde_json::Value::Object(map) = value else {
        return Err(malformed(path, line_no, "record is not a JSON object"));
    };

    let id = match map.get("id") {
        None => return Err(malformed(path, line_no, "missing field id")),
        Some(serde_json::Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => {
            return Err(malformed(path, line_no, "field id must be a non-empty string"));
        }
    };
    let document = match map.get("document") {
        None => return Err(malformed(path, line_no, "missing field document")),
        Some(serde_json::Value::String(s)) if !s.trim().is_empty() => nfc(s),
        Some(_) => {
            return Err(malformed(
                path,
                line_no,
                "field document must be a non-empty string",
            ));
        }
    };

    let optional_text = |field: &str| -> Result<Option<String>> {
        match map.get(field) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::String(s)) => Ok(Some(nfc(s))),
            Some(_) => Err(malformed(
                path,
                line_no,
                format!("field {field} must be a string"),
            )),
        }
    };
    let reference_summary = optional_text("reference_summary")?;
    let hypothesis = optional_text("hypothesis")?;

    let mut codes = Vec::new();
    if let Some(value) = map.get("codes") {
        let serde_json::Value::Array(items) = value else {
            return Err(malformed(path, line_no, "field codes must be an array"));
        };
        for item in items {
            let serde_json::Value::String(code) = item else {
                return Err(malformed(path, line_no, "codes entries must be strings"));
            };
            if !control::is_code_token(code) {
                return Err(malformed(
                    path,
                    line_no,
                    format!("code {code:?} does not match the control-code grammar"),
                ));
            }
            codes.push(code.clone());
        }
    }

    let mut meta = BTreeMap::new();
    if let Some(value) = map.get("meta") {
        let serde_json::Value::Object(entries) = value else {
            return Err(malformed(path, line_no, "field meta must be an object"));
        };
        for (key, value) in entries {
            let serde_json::Value::String(s) = value else {
                return Err(malformed(
                    path,
                    line_no,
                    format!("meta value for {key:?} must be a string"),
                ));
            };
            meta.insert(key.clone(), s.clone());
        }
    }
    for (key, value) in &map {
        if KNOWN_FIELDS.contains(&key.as_str()) {
            continue;
        }
        let rendered = match value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        if meta.insert(key.clone(), rendered).is_some() {
            return Err(malformed(
                path,
                line_no,
                format!("unknown field {key:?} collides with a meta key"),
            ));
        }
    }

    Ok(Pair {
        id,
        codes,
        document,
        reference_summary,
        hypothesis,
        meta,
    })
}

/// Writes one record per line with a fixed field order: id, codes,
/// document, reference_summary, hypothesis, meta. `load(write(d)) == d`
/// for datasets whose text is NFC-normalized (anything produced by
/// [`load_dataset`] is).
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    for pair in &dataset.pairs {
        let json = serde_json::to_string(pair).expect("pair serialization cannot fail");
        writeln!(writer, "{json}").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(file, "{line}").unwrap();
        }
        file.flush().unwrap();
        file
    }

    #[test]
    fn load_preserves_order() {
        let file = write_lines(&[
            r#"{"id":"a","document":"First doc."}"#,
            r#"{"id":"b","document":"Second doc."}"#,
        ]);
        let dataset = load_dataset(file.path(), DataFormat::Jsonl).unwrap();
        assert_eq!(dataset.pairs.len(), 2);
        assert_eq!(dataset.pairs[0].id, "a");
        assert_eq!(dataset.pairs[1].id, "b");
    }

    #[test]
    fn load_reports_missing_document_with_line() {
        let file = write_lines(&[
            r#"{"id":"a","document":"ok"}"#,
            r#"{"id":"b","document":"ok"}"#,
            r#"{"id":"c"}"#,
        ]);
        let err = load_dataset(file.path(), DataFormat::Jsonl).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line 3: missing field document"), "{message}");
    }

    #[test]
    fn load_reports_duplicate_ids_with_both_lines() {
        let file = write_lines(&[
            r#"{"id":"a","document":"x"}"#,
            r#"{"id":"a","document":"y"}"#,
        ]);
        match load_dataset(file.path(), DataFormat::Jsonl).unwrap_err() {
            Error::DuplicateId {
                id,
                first_line,
                second_line,
            } => {
                assert_eq!(id, "a");
                assert_eq!((first_line, second_line), (1, 2));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn unknown_fields_land_in_meta() {
        let file = write_lines(&[r#"{"id":"a","document":"x","source":"bbc","score":3}"#]);
        let dataset = load_dataset(file.path(), DataFormat::Jsonl).unwrap();
        let meta = &dataset.pairs[0].meta;
        assert_eq!(meta.get("source").map(String::as_str), Some("bbc"));
        assert_eq!(meta.get("score").map(String::as_str), Some("3"));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut pair = Pair::new("a", "Doc text.").with_reference("Ref.");
        pair.codes = vec!["<FF-high>".to_string()];
        pair.meta.insert("k".into(), "v".into());
        let dataset = Dataset::new("fixture", vec![pair, Pair::new("b", "Other.")]).unwrap();

        let first = dir.path().join("fixture.jsonl");
        write_dataset(&dataset, &first).unwrap();
        let reloaded = load_dataset(&first, DataFormat::Jsonl).unwrap();
        assert_eq!(reloaded, dataset);

        let second = dir.path().join("fixture2.jsonl");
        write_dataset(&reloaded, &second).unwrap();
        assert_eq!(
            std::fs::read(&first).unwrap(),
            std::fs::read(&second).unwrap()
        );
    }

    #[test]
    fn text_fields_are_nfc_normalized_on_load() {
        // "e" + combining acute vs precomposed "é"
        let file = write_lines(&[r#"{"id":"a","document":"café"}"#]);
        let dataset = load_dataset(file.path(), DataFormat::Jsonl).unwrap();
        assert_eq!(dataset.pairs[0].document, "café");
    }

    #[test]
    fn empty_reference_is_preserved_but_absent_is_none() {
        let file = write_lines(&[
            r#"{"id":"a","document":"x","reference_summary":""}"#,
            r#"{"id":"b","document":"y"}"#,
        ]);
        let dataset = load_dataset(file.path(), DataFormat::Jsonl).unwrap();
        assert_eq!(dataset.pairs[0].reference_summary.as_deref(), Some(""));
        assert_eq!(dataset.pairs[1].reference_summary, None);
    }

    #[test]
    fn invalid_code_grammar_is_rejected() {
        let file = write_lines(&[r#"{"id":"a","document":"x","codes":["FF-high"]}"#]);
        assert!(load_dataset(file.path(), DataFormat::Jsonl).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dataset = Dataset::new("d", vec![Pair::new("a", "x")]).unwrap();
        let err = write_dataset(&dataset, Path::new("/nonexistent-dir/out.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}

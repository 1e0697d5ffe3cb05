//! Phrase→vector tables in JSON-Lines form.
//!
//! ```text
//! {"model_id": "clip-vit-b32", "dimension": 3}
//! {"phrase": "2 apples", "vector": [0.1, 0.2, 0.3]}
//! ```
//!
//! The header line is optional; without it the model id is `"unknown"` and
//! the dimension is taken from the first record. Vectors are stored exactly
//! as provided.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::phrasegen::PhraseManifest;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("line {line}: vector has dimension {found}, table dimension is {expected}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite component at index {index}")]
    NonFinite { line: usize, index: usize },
    #[error("line {line}: zero-norm vector for '{phrase}'")]
    ZeroNorm { line: usize, phrase: String },
    #[error("line {line}: duplicate phrase '{phrase}'")]
    DuplicatePhrase { line: usize, phrase: String },
    #[error("missing phrase '{0}'")]
    MissingPhrase(String),
    #[error("response carries {found} vectors for {expected} phrases")]
    ResponseLength { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TableError {
    fn record(line: usize, message: impl Into<String>) -> Self {
        Self::Record { line, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    model_id: String,
    dimension: usize,
    phrases: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model_id: String,
    dimension: usize,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    phrase: &'a str,
    vector: &'a [f64],
}

impl EmbeddingTable {
    pub fn new(model_id: impl Into<String>, dimension: usize) -> Self {
        Self {
            model_id: model_id.into(),
            dimension,
            phrases: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn set_model_id(&mut self, id: impl Into<String>) {
        self.model_id = id.into();
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Phrases in insertion order.
    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.index.contains_key(phrase)
    }

    /// Exact-match lookup.
    pub fn lookup(&self, phrase: &str) -> Result<&[f64], TableError> {
        self.get(phrase).ok_or_else(|| TableError::MissingPhrase(phrase.to_string()))
    }

    pub fn get(&self, phrase: &str) -> Option<&[f64]> {
        let i = *self.index.get(phrase)?;
        Some(&self.data[i * self.dimension..(i + 1) * self.dimension])
    }

    /// Adds a record, enforcing the table invariants. `line` is only used
    /// for error context.
    pub fn insert(&mut self, phrase: String, vector: &[f64], line: usize) -> Result<(), TableError> {
        if vector.is_empty() {
            return Err(TableError::record(line, "empty vector"));
        }
        if self.dimension == 0 {
            self.dimension = vector.len();
        }
        if vector.len() != self.dimension {
            return Err(TableError::DimensionMismatch {
                line,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(TableError::NonFinite { line, index });
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(TableError::ZeroNorm { line, phrase });
        }
        if self.index.contains_key(&phrase) {
            return Err(TableError::DuplicatePhrase { line, phrase });
        }
        self.index.insert(phrase.clone(), self.phrases.len());
        self.phrases.push(phrase);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.phrases.iter().zip(self.data.chunks_exact(self.dimension.max(1))).map(|(p, v)| (p.as_str(), v))
    }

    /// Writes the JSON-Lines form, header first.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TableError> {
        let header = Header { model_id: self.model_id.clone(), dimension: self.dimension };
        serde_json::to_writer(&mut w, &header).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
        for (phrase, vector) in self.iter() {
            serde_json::to_writer(&mut w, &RecordOut { phrase, vector }).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Parses a JSON-Lines table from a reader.
pub fn read_table<R: BufRead>(reader: R) -> Result<EmbeddingTable, TableError> {
    let mut table = EmbeddingTable::new("unknown", 0);
    let mut saw_record = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(trimmed)
            .map_err(|e| TableError::Json { line: line_no, message: e.to_string() })?;
        let obj =
            value.as_object().ok_or_else(|| TableError::record(line_no, "record must be a JSON object"))?;

        if !saw_record && !obj.contains_key("phrase") && obj.contains_key("model_id") {
            if !table.is_empty() || table.dimension != 0 {
                return Err(TableError::record(line_no, "header must be the first line"));
            }
            let header: Header = serde_json::from_value(value.clone())
                .map_err(|e| TableError::record(line_no, format!("invalid header: {e}")))?;
            if header.dimension == 0 {
                return Err(TableError::record(line_no, "header dimension must be positive"));
            }
            table.model_id = header.model_id;
            table.dimension = header.dimension;
            continue;
        }

        let phrase = obj
            .get("phrase")
            .and_then(Value::as_str)
            .ok_or_else(|| TableError::record(line_no, "missing string field 'phrase'"))?;
        let arr = obj
            .get("vector")
            .and_then(Value::as_array)
            .ok_or_else(|| TableError::record(line_no, "missing array field 'vector'"))?;
        let mut vector = Vec::with_capacity(arr.len());
        for (i, v) in arr.iter().enumerate() {
            // serde_json rejects NaN/Infinity literals; a null here is the
            // usual way they leak out of Python writers.
            let x = v.as_f64().ok_or(TableError::NonFinite { line: line_no, index: i })?;
            vector.push(x);
        }
        table.insert(phrase.to_string(), &vector, line_no)?;
        saw_record = true;
    }
    Ok(table)
}

pub fn parse_table(text: &str) -> Result<EmbeddingTable, TableError> {
    read_table(text.as_bytes())
}

/// Request body for the optional `/embed` provider endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model_id: String,
    pub phrases: Vec<String>,
}

/// Response body of the `/embed` endpoint; vectors are in request order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dimension: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbedRequest {
    pub fn from_manifest(model_id: impl Into<String>, manifest: &PhraseManifest) -> Self {
        Self { model_id: model_id.into(), phrases: manifest.phrases.clone() }
    }
}

/// Builds a table from an `/embed` response. Record positions are reported
/// 1-based in error messages.
pub fn table_from_response(
    request: &EmbedRequest,
    response: &EmbedResponse,
) -> Result<EmbeddingTable, TableError> {
    if request.phrases.len() != response.vectors.len() {
        return Err(TableError::ResponseLength {
            expected: request.phrases.len(),
            found: response.vectors.len(),
        });
    }
    let mut table = EmbeddingTable::new(request.model_id.clone(), response.dimension);
    for (i, (p, v)) in request.phrases.iter().zip(&response.vectors).enumerate() {
        table.insert(p.clone(), v, i + 1)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    pub covered_nouns: Vec<String>,
    pub uncovered_nouns: Vec<String>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Compares a table against a manifest.
pub fn validate_coverage(table: &EmbeddingTable, manifest: &PhraseManifest) -> CoverageReport {
    let missing: Vec<String> = manifest.phrases.iter().filter(|p| !table.contains(p)).cloned().collect();
    let wanted: BTreeSet<&str> = manifest.phrases.iter().map(String::as_str).collect();
    let extra = table.phrases().iter().filter(|p| !wanted.contains(p.as_str())).cloned().collect();

    let mut covered_nouns: Vec<String> = Vec::new();
    let mut uncovered_nouns: Vec<String> = Vec::new();
    let mut order: Vec<&str> = Vec::new();
    let mut complete: HashMap<&str, bool> = HashMap::new();
    for rec in &manifest.provenance {
        let ok = table.contains(&rec.phrase);
        complete.entry(rec.singular.as_str()).and_modify(|c| *c &= ok).or_insert_with(|| {
            order.push(rec.singular.as_str());
            ok
        });
    }
    for noun in order {
        if complete[noun] {
            covered_nouns.push(noun.to_string());
        } else {
            uncovered_nouns.push(noun.to_string());
        }
    }
    CoverageReport { missing, extra, covered_nouns, uncovered_nouns }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::parse_lexicon;
    use crate::phrasegen::{phrase_manifest, QuantityRange};
    use proptest::prelude::*;

    #[test]
    fn parses_two_records() {
        let t = parse_table(
            "{\"phrase\": \"2 apples\", \"vector\": [1, 0, 0]}\n{\"phrase\": \"3 apples\", \"vector\": [0, 1, 0.5]}\n",
        )
        .unwrap();
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.model_id(), "unknown");
        assert_eq!(t.lookup("3 apples").unwrap(), &[0.0, 1.0, 0.5]);
    }

    #[test]
    fn header_sets_model_and_dimension() {
        let t = parse_table(
            "{\"model_id\": \"m1\", \"dimension\": 2}\n\n{\"phrase\": \"2 x\", \"vector\": [1, 2]}\n",
        )
        .unwrap();
        assert_eq!(t.model_id(), "m1");
        assert_eq!(t.dimension(), 2);
        let err = parse_table(
            "{\"model_id\": \"m1\", \"dimension\": 2}\n{\"phrase\": \"2 x\", \"vector\": [1, 2, 3]}\n",
        )
        .unwrap_err();
        assert!(matches!(err, TableError::DimensionMismatch { line: 2, expected: 2, found: 3 }));
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        let err = parse_table(
            "{\"phrase\": \"a\", \"vector\": [1, 2, 3]}\n{\"phrase\": \"b\", \"vector\": [1, 2, 3, 4]}\n",
        )
        .unwrap_err();
        assert!(matches!(err, TableError::DimensionMismatch { line: 2, expected: 3, found: 4 }));
    }

    #[test]
    fn rejects_degenerate_vectors() {
        let err = parse_table("{\"phrase\": \"a\", \"vector\": [0, 0, 0]}").unwrap_err();
        assert!(matches!(err, TableError::ZeroNorm { line: 1, .. }));
        let err = parse_table("{\"phrase\": \"a\", \"vector\": [1, null]}").unwrap_err();
        assert!(matches!(err, TableError::NonFinite { line: 1, index: 1 }));
        let err = parse_table("{\"phrase\": \"a\", \"vector\": [1, NaN]}").unwrap_err();
        assert!(matches!(err, TableError::Json { line: 1, .. }));
        let err = parse_table("{\"phrase\": \"a\", \"vector\": [1]}\n{\"phrase\": \"a\", \"vector\": [2]}")
            .unwrap_err();
        assert!(matches!(err, TableError::DuplicatePhrase { line: 2, .. }));
        let err = parse_table("{\"phrase\": \"a\", \"vector\": []}").unwrap_err();
        assert!(matches!(err, TableError::Record { line: 1, .. }));
        let err = parse_table("[1, 2]").unwrap_err();
        assert!(matches!(err, TableError::Record { line: 1, .. }));
    }

    #[test]
    fn lookup_is_exact() {
        let t = parse_table("{\"phrase\": \"2 apples\", \"vector\": [1, 2]}").unwrap();
        assert_eq!(t.lookup("2 apples").unwrap(), &[1.0, 2.0]);
        let err = t.lookup("2 Apples").unwrap_err();
        assert_eq!(err.to_string(), "missing phrase '2 Apples'");
    }

    fn manifest() -> PhraseManifest {
        let (lex, _) = parse_lexicon("book\tbooks\n").unwrap();
        phrase_manifest(&lex, QuantityRange::new(2, 10).unwrap())
    }

    fn table_for(phrases: &[String]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new("t", 2);
        for (i, p) in phrases.iter().enumerate() {
            t.insert(p.clone(), &[1.0, i as f64], i + 1).unwrap();
        }
        t
    }

    #[test]
    fn coverage_complete() {
        let m = manifest();
        let r = validate_coverage(&table_for(&m.phrases), &m);
        assert!(r.missing.is_empty() && r.extra.is_empty());
        assert_eq!(r.covered_nouns, vec!["book"]);
    }

    #[test]
    fn coverage_missing_phrase() {
        let m = manifest();
        let phrases: Vec<String> = m.phrases.iter().filter(|p| *p != "7 books").cloned().collect();
        let r = validate_coverage(&table_for(&phrases), &m);
        assert_eq!(r.missing, vec!["7 books"]);
        assert_eq!(r.uncovered_nouns, vec!["book"]);
        assert!(r.covered_nouns.is_empty());
    }

    #[test]
    fn coverage_extra_phrase() {
        let m = manifest();
        let mut phrases = m.phrases.clone();
        phrases.push("a cat".into());
        let r = validate_coverage(&table_for(&phrases), &m);
        assert_eq!(r.extra, vec!["a cat"]);
        assert!(r.is_complete());
        assert_eq!(r.covered_nouns, vec!["book"]);
    }

    #[test]
    fn provider_round_trip() {
        let m = manifest();
        let req = EmbedRequest::from_manifest("remote", &m);
        let body = serde_json::to_string(&req).unwrap();
        assert!(body.starts_with("{\"model_id\":\"remote\",\"phrases\":[\"2 books\""));
        let resp: EmbedResponse = serde_json::from_str(&format!(
            "{{\"dimension\": 2, \"vectors\": [{}]}}",
            (0..9).map(|i| format!("[1, {i}]")).collect::<Vec<_>>().join(",")
        ))
        .unwrap();
        let t = table_from_response(&req, &resp).unwrap();
        assert_eq!(t.lookup("4 books").unwrap(), &[1.0, 2.0]);
        let short = EmbedResponse { dimension: 2, vectors: vec![vec![1.0, 0.0]] };
        assert!(matches!(
            table_from_response(&req, &short),
            Err(TableError::ResponseLength { expected: 9, found: 1 })
        ));
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..8)) {
            let mut t = EmbeddingTable::new("rt", 3);
            for (i, mut v) in rows.into_iter().enumerate() {
                v[0] += 2e6; // keep the norm positive
                t.insert(format!("{} things", i + 2), &v, i + 1).unwrap();
            }
            let back = parse_table(&t.to_jsonl()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}

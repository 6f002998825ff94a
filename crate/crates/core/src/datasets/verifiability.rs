//! Adapter for Verifiability-style files: answers split into sentences, each
//! with a support label and citations into the retrieved web pages.
//!
//! Input is a JSON array of questions or one question per line:
//!
//! ```json
//! {"id": "q1", "question": "...",
//!  "documents": [{"url": "...", "sentences": ["..."]}, {"text": "..."}],
//!  "answers": [{"id": "a", "sentences": [
//!     {"text": "...", "support": "full", "citations": [{"document": 0, "sentence": 3}]}]}]}
//! ```
//!
//! Documents are flattened in order into one evidence list. Only fully
//! supported sentences receive gold evidence.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{drop_invalid, DataError, IngestionStats};
use crate::model::{AnswerPart, EvidenceSentence, GoldEntry, Granularity, Question, TaskRecord, UnitKey};
use crate::text::split_sentences;

pub const DATASET: &str = "verifiability";

#[derive(Debug, Deserialize)]
pub struct SourceQuestion {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub documents: Vec<SourceDocument>,
    #[serde(default)]
    pub answers: Vec<SourceAnswer>,
}

#[derive(Debug, Deserialize)]
pub struct SourceDocument {
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub sentences: Option<Vec<String>>,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct SourceAnswer {
    #[serde(default)]
    pub id: Option<String>,
    pub sentences: Vec<SourceSentence>,
}

#[derive(Debug, Deserialize)]
pub struct SourceSentence {
    pub text: String,
    #[serde(default)]
    pub support: Support,
    #[serde(default)]
    pub citations: Vec<serde_json::Value>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    Full,
    Partial,
    #[default]
    None,
}

#[derive(Debug, Deserialize)]
struct Citation {
    document: usize,
    sentence: usize,
}

fn document_sentences(doc: &SourceDocument) -> Vec<String> {
    match (&doc.sentences, &doc.text) {
        (Some(s), _) => s.iter().filter(|t| !t.trim().is_empty()).cloned().collect(),
        (None, Some(t)) => split_sentences(t),
        (None, None) => Vec::new(),
    }
}

fn parse_source(path: &Path, raw: &str) -> Result<Vec<SourceQuestion>, DataError> {
    if raw.trim_start().starts_with('[') {
        return serde_json::from_str(raw).map_err(|e| DataError::schema(path, e.to_string()));
    }
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DataError::Line { path: path.to_path_buf(), line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// Builds one record per answer. A citation that does not point at an
/// existing document sentence makes the whole record invalid.
pub fn to_records(q: &SourceQuestion) -> Vec<Result<TaskRecord, String>> {
    let mut offsets = Vec::with_capacity(q.documents.len());
    let mut evidence = Vec::new();
    for doc in &q.documents {
        let sentences = document_sentences(doc);
        offsets.push((evidence.len(), sentences.len()));
        evidence.extend(sentences);
    }
    q.answers
        .iter()
        .enumerate()
        .map(|(ai, answer)| {
            let id = format!("{}#{}", q.id, answer.id.clone().unwrap_or_else(|| ai.to_string()));
            let mut gold = Vec::new();
            for (si, s) in answer.sentences.iter().enumerate() {
                if s.support != Support::Full || s.citations.is_empty() {
                    continue;
                }
                let mut indices = BTreeSet::new();
                for c in &s.citations {
                    let c: Citation = serde_json::from_value(c.clone())
                        .map_err(|e| format!("{id}: malformed citation on sentence {si}: {e}"))?;
                    match offsets.get(c.document) {
                        Some(&(start, len)) if c.sentence < len => {
                            indices.insert(start + c.sentence);
                        }
                        _ => {
                            return Err(format!(
                                "{id}: citation ({}, {}) on sentence {si} is out of range",
                                c.document, c.sentence
                            ))
                        }
                    }
                }
                gold.push(GoldEntry { unit_key: UnitKey::Part(si), evidence_indices: indices });
            }
            let texts: Vec<&str> = answer.sentences.iter().map(|s| s.text.as_str()).collect();
            Ok(TaskRecord {
                id,
                dataset: DATASET.into(),
                granularity: Granularity::PerSentence,
                question: Question::new(q.id.clone(), &q.question),
                answer_parts: AnswerPart::answer(&texts),
                evidence: EvidenceSentence::document(&evidence),
                gold,
                excluded_keys: Default::default(),
            })
        })
        .collect()
}

pub fn load_verifiability(path: &Path) -> Result<(Vec<TaskRecord>, IngestionStats), DataError> {
    let raw = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let questions = parse_source(path, &raw)?;
    let mut stats = IngestionStats::default();
    let mut records = Vec::new();
    for q in &questions {
        for r in to_records(q) {
            stats.records_in += 1;
            match r {
                Ok(r) => records.push(r),
                Err(reason) => {
                    log::warn!("dropping {reason}");
                    stats.dropped_invalid += 1;
                    stats.drop_reasons.push(reason);
                }
            }
        }
    }
    stats.records_out = records.len();
    let (records, checked) = drop_invalid(records);
    // answer ids must be unique within the file
    let mut ids = BTreeMap::new();
    for r in &records {
        *ids.entry(r.id.clone()).or_insert(0usize) += 1;
    }
    if let Some((id, _)) = ids.iter().find(|(_, n)| **n > 1) {
        return Err(DataError::schema(path, format!("duplicate record id {id}")));
    }
    Ok((records, stats.then(checked)))
}

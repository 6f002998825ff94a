//! Adapter for QASPER-style files: a map from paper id to the paper's
//! abstract, full text and question/answer annotations.
//!
//! ```json
//! {"paper-id": {"abstract": "...",
//!   "full_text": [{"section_name": "...", "paragraphs": ["..."]}],
//!   "qas": [{"question": "...", "question_id": "...", "answers": [{"answer": {
//!      "unanswerable": false, "extractive_spans": [], "yes_no": null,
//!      "free_form_answer": "...", "evidence": ["paragraph"], "highlighted_evidence": []}}]}]}}
//! ```
//!
//! The document is the abstract followed by every paragraph, split into
//! sentences. Gold is every sentence of the annotated evidence paragraphs
//! that can be found in the document.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::exclusion::normalize_for_exclusion;
use super::{drop_invalid, DataError, IngestionStats};
use crate::model::{AnswerPart, EvidenceSentence, GoldEntry, Granularity, Question, TaskRecord, UnitKey};
use crate::text::split_sentences;

pub const DATASET: &str = "qasper";

#[derive(Debug, Deserialize)]
pub struct Paper {
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub full_text: Vec<Section>,
    #[serde(default)]
    pub qas: Vec<Qa>,
}

#[derive(Debug, Deserialize)]
pub struct Section {
    #[serde(default)]
    pub section_name: Option<String>,
    #[serde(default)]
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct Qa {
    pub question: String,
    pub question_id: String,
    #[serde(default)]
    pub answers: Vec<AnswerWrapper>,
}

#[derive(Debug, Deserialize)]
pub struct AnswerWrapper {
    pub answer: Answer,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct Answer {
    pub unanswerable: bool,
    pub extractive_spans: Vec<String>,
    pub yes_no: Option<bool>,
    pub free_form_answer: String,
    pub evidence: Vec<String>,
    pub highlighted_evidence: Vec<String>,
}

fn document(paper: &Paper) -> Vec<String> {
    std::iter::once(paper.abstract_text.as_str())
        .chain(paper.full_text.iter().flat_map(|s| s.paragraphs.iter().map(String::as_str)))
        .flat_map(split_sentences)
        .collect()
}

fn answer_sentences(a: &Answer) -> Vec<String> {
    if !a.free_form_answer.trim().is_empty() {
        split_sentences(&a.free_form_answer)
    } else {
        a.extractive_spans.iter().flat_map(|s| split_sentences(s)).collect()
    }
}

/// Records for one paper, plus counts of skipped answers and gold sentences
/// that could not be located.
pub fn paper_records(paper_id: &str, paper: &Paper, stats: &mut IngestionStats) -> Vec<TaskRecord> {
    let doc = document(paper);
    let mut exact: HashMap<&str, usize> = HashMap::new();
    let mut loose: HashMap<String, usize> = HashMap::new();
    for (i, s) in doc.iter().enumerate() {
        exact.entry(s.as_str()).or_insert(i);
        loose.entry(normalize_for_exclusion(s)).or_insert(i);
    }
    let evidence = EvidenceSentence::document(&doc);
    let mut out = Vec::new();
    for qa in &paper.qas {
        for (ai, w) in qa.answers.iter().enumerate() {
            let a = &w.answer;
            if a.unanswerable {
                stats.skipped_unanswerable += 1;
                continue;
            }
            let parts = answer_sentences(a);
            if a.yes_no.is_some() && parts.is_empty() {
                stats.skipped_yes_no += 1;
                continue;
            }
            let mut indices = BTreeSet::new();
            for paragraph in &a.evidence {
                for s in split_sentences(paragraph) {
                    match exact.get(s.as_str()).copied().or_else(|| loose.get(&normalize_for_exclusion(&s)).copied()) {
                        Some(i) => {
                            indices.insert(i);
                        }
                        None => stats.unresolved_gold += 1,
                    }
                }
            }
            stats.records_in += 1;
            out.push(TaskRecord {
                id: format!("{}#{ai}", qa.question_id),
                dataset: DATASET.into(),
                granularity: Granularity::PerAnswer,
                question: Question::new(qa.question_id.clone(), &qa.question),
                answer_parts: AnswerPart::answer(&parts),
                evidence: evidence.clone(),
                gold: vec![GoldEntry { unit_key: UnitKey::WholeAnswer, evidence_indices: indices }],
                excluded_keys: Default::default(),
            });
        }
    }
    log::debug!("{paper_id}: {} sentences, {} records", doc.len(), out.len());
    out
}

pub fn load_qasper(path: &Path) -> Result<(Vec<TaskRecord>, IngestionStats), DataError> {
    let raw = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    // preserve_order keeps papers in file order
    let papers: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&raw).map_err(|e| DataError::schema(path, e.to_string()))?;
    let mut stats = IngestionStats::default();
    let mut records = Vec::new();
    for (id, value) in papers {
        match serde_json::from_value::<Paper>(value) {
            Ok(paper) => records.extend(paper_records(&id, &paper, &mut stats)),
            Err(e) => return Err(DataError::schema(path, format!("paper {id}: {e}"))),
        }
    }
    stats.records_out = records.len();
    let (records, checked) = drop_invalid(records);
    Ok((records, stats.then(checked)))
}

//! Line-delimited JSON files and the task record line format.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::model::{AnswerPart, EvidenceSentence, GoldEntry, Granularity, Question, TaskRecord, UnitKey};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum QuestionField {
    Full(Question),
    Text(String),
}

/// One task record as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordLine {
    id: String,
    dataset: String,
    granularity: Granularity,
    question: QuestionField,
    answer_parts: Vec<String>,
    evidence: Vec<String>,
    #[serde(default)]
    gold: Vec<GoldEntry>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    excluded_keys: BTreeSet<UnitKey>,
}

impl From<&TaskRecord> for RecordLine {
    fn from(r: &TaskRecord) -> Self {
        Self {
            id: r.id.clone(),
            dataset: r.dataset.clone(),
            granularity: r.granularity,
            question: QuestionField::Full(r.question.clone()),
            answer_parts: r.answer_parts.iter().map(|p| p.text.clone()).collect(),
            evidence: r.evidence.iter().map(|e| e.text.clone()).collect(),
            gold: r.gold.clone(),
            excluded_keys: r.excluded_keys.clone(),
        }
    }
}

impl From<RecordLine> for TaskRecord {
    fn from(l: RecordLine) -> Self {
        let question = match l.question {
            QuestionField::Full(q) => Question::new(q.id, &q.text),
            QuestionField::Text(t) => Question::new(l.id.clone(), &t),
        };
        TaskRecord {
            id: l.id,
            dataset: l.dataset,
            granularity: l.granularity,
            question,
            answer_parts: AnswerPart::answer(&l.answer_parts),
            evidence: EvidenceSentence::document(&l.evidence),
            gold: l.gold,
            excluded_keys: l.excluded_keys,
        }
    }
}

pub fn record_to_line(record: &TaskRecord) -> String {
    serde_json::to_string(&RecordLine::from(record)).expect("records serialize")
}

pub fn record_from_line(line: &str) -> Result<TaskRecord, serde_json::Error> {
    serde_json::from_str::<RecordLine>(line).map(TaskRecord::from)
}

/// Non-empty lines with their 1-based line numbers.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, DataError> {
    let file = fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            serde_json::from_str(&line).map_err(|e| DataError::Line { path: path.to_path_buf(), line: n, message: e.to_string() })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<TaskRecord>, DataError> {
    Ok(read_jsonl::<RecordLine>(path)?.into_iter().map(TaskRecord::from).collect())
}

/// Writes the lines to a temporary file next to `path` and renames it.
pub fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<(), DataError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DataError::io(dir, e))?;
    for line in lines {
        tmp.write_all(line.as_bytes()).map_err(|e| DataError::io(path, e))?;
        tmp.write_all(b"\n").map_err(|e| DataError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| DataError::io(path, e.error))?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DataError> {
    write_lines(path, items.iter().map(|i| serde_json::to_string(i).expect("items serialize")))
}

pub fn write_records(path: &Path, records: &[TaskRecord]) -> Result<(), DataError> {
    write_lines(path, records.iter().map(record_to_line))
}

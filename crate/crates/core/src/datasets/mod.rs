//! Source dataset adapters, the JSONL record format and exact-match exclusion.

pub mod exclusion;
pub mod jsonl;
pub mod qasper;
pub mod verifiability;

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{validate_record, TaskRecord};

pub use exclusion::{apply_exclusions, normalize_for_exclusion};
pub use jsonl::{read_jsonl, read_records, record_from_line, record_to_line, write_jsonl, write_records};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
}

impl DataError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        DataError::Io { path: path.to_path_buf(), source }
    }

    pub fn schema(path: &Path, message: impl Into<String>) -> Self {
        DataError::Schema { path: path.to_path_buf(), message: message.into() }
    }
}

/// Counts for one ingestion. `records_in` is the number of candidate records
/// built from the source; entries that never became records (unanswerable or
/// yes/no questions) are counted separately.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionStats {
    pub records_in: usize,
    pub records_out: usize,
    pub excluded_exact_match: usize,
    pub dropped_invalid: usize,
    /// Answer sentences excluded inside records that were kept.
    pub excluded_parts: usize,
    pub skipped_unanswerable: usize,
    pub skipped_yes_no: usize,
    /// Gold evidence sentences that could not be located in the document.
    pub unresolved_gold: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drop_reasons: Vec<String>,
}

impl IngestionStats {
    pub fn is_conserved(&self) -> bool {
        self.records_out + self.excluded_exact_match + self.dropped_invalid == self.records_in
    }

    /// Stats of this stage followed by `next`, which consumed this stage's output.
    pub fn then(mut self, next: IngestionStats) -> IngestionStats {
        debug_assert_eq!(next.records_in, self.records_out);
        self.records_out = next.records_out;
        self.excluded_exact_match += next.excluded_exact_match;
        self.dropped_invalid += next.dropped_invalid;
        self.excluded_parts += next.excluded_parts;
        self.skipped_unanswerable += next.skipped_unanswerable;
        self.skipped_yes_no += next.skipped_yes_no;
        self.unresolved_gold += next.unresolved_gold;
        self.drop_reasons.extend(next.drop_reasons);
        self
    }
}

/// Drops records with structural violations, keeping the reason.
pub fn drop_invalid(records: Vec<TaskRecord>) -> (Vec<TaskRecord>, IngestionStats) {
    let mut stats = IngestionStats { records_in: records.len(), ..IngestionStats::default() };
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let broken: Vec<String> = validate_record(&r).iter().filter(|v| v.is_structural()).map(|v| v.to_string()).collect();
        if broken.is_empty() {
            out.push(r);
        } else {
            log::warn!("dropping record {}: {}", r.id, broken.join("; "));
            stats.dropped_invalid += 1;
            stats.drop_reasons.push(format!("{}: {}", r.id, broken.join("; ")));
        }
    }
    stats.records_out = out.len();
    (out, stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Verifiability,
    Qasper,
    Jsonl,
}

impl FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "verifiability" => Ok(Self::Verifiability),
            "qasper" => Ok(Self::Qasper),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown format `{other}` (verifiability, qasper, jsonl)")),
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Verifiability => "verifiability",
            Self::Qasper => "qasper",
            Self::Jsonl => "jsonl",
        })
    }
}

/// Loads a source file without applying exclusions.
pub fn load(format: SourceFormat, path: &Path) -> Result<(Vec<TaskRecord>, IngestionStats), DataError> {
    match format {
        SourceFormat::Verifiability => verifiability::load_verifiability(path),
        SourceFormat::Qasper => qasper::load_qasper(path),
        SourceFormat::Jsonl => Ok(drop_invalid(read_records(path)?)),
    }
}

/// Loads a source file and applies exact-match exclusion.
pub fn ingest(format: SourceFormat, path: &Path) -> Result<(Vec<TaskRecord>, IngestionStats), DataError> {
    let (records, loaded) = load(format, path)?;
    let (records, excluded) = apply_exclusions(records);
    Ok((records, loaded.then(excluded)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub questions: usize,
    pub records: usize,
    pub mean_evidence_sentences: f64,
    pub mean_answer_sentences: f64,
}

/// Sentence counts are averaged per question, taking the first record seen
/// for each question.
pub fn summarize(records: &[TaskRecord]) -> DatasetSummary {
    let mut seen = BTreeSet::new();
    let (mut evidence, mut answers) = (0usize, 0usize);
    for r in records {
        if seen.insert(r.question.id.as_str()) {
            evidence += r.evidence.len();
        }
        answers += r.answer_parts.len();
    }
    let q = seen.len();
    DatasetSummary {
        questions: q,
        records: records.len(),
        mean_evidence_sentences: if q == 0 { 0.0 } else { evidence as f64 / q as f64 },
        mean_answer_sentences: if records.is_empty() { 0.0 } else { answers as f64 / records.len() as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnswerPart, EvidenceSentence, GoldEntry, Granularity, Question, UnitKey};

    fn rec(id: &str, qid: &str, n_ev: usize, gold_idx: usize) -> TaskRecord {
        let ev: Vec<String> = (0..n_ev).map(|i| format!("Sentence {i}.")).collect();
        TaskRecord {
            id: id.into(),
            dataset: "t".into(),
            granularity: Granularity::PerAnswer,
            question: Question::new(qid, "Q?"),
            answer_parts: AnswerPart::answer(&["A new claim."]),
            evidence: EvidenceSentence::document(&ev),
            gold: vec![GoldEntry { unit_key: UnitKey::WholeAnswer, evidence_indices: [gold_idx].into() }],
            excluded_keys: Default::default(),
        }
    }

    #[test]
    fn invalid_records_are_dropped_with_reason() {
        let (out, stats) = drop_invalid(vec![rec("a", "q", 3, 1), rec("b", "q", 3, 9)]);
        assert_eq!(out.len(), 1);
        assert_eq!(stats.dropped_invalid, 1);
        assert!(stats.drop_reasons[0].starts_with("b:"));
        assert!(stats.is_conserved());
    }

    #[test]
    fn chained_stats_stay_conserved() {
        let a = IngestionStats { records_in: 10, records_out: 8, dropped_invalid: 2, ..Default::default() };
        let b = IngestionStats { records_in: 8, records_out: 5, excluded_exact_match: 3, ..Default::default() };
        let c = a.then(b);
        assert!(c.is_conserved());
        assert_eq!((c.records_in, c.records_out), (10, 5));
    }

    #[test]
    fn summary_counts_questions_once() {
        let s = summarize(&[rec("a", "q1", 4, 0), rec("b", "q1", 4, 0), rec("c", "q2", 2, 0)]);
        assert_eq!(s.questions, 2);
        assert_eq!(s.records, 3);
        assert!((s.mean_evidence_sentences - 3.0).abs() < 1e-12);
        assert!((s.mean_answer_sentences - 1.0).abs() < 1e-12);
    }

    #[test]
    fn format_names() {
        for f in [SourceFormat::Verifiability, SourceFormat::Qasper, SourceFormat::Jsonl] {
            assert_eq!(f.to_string().parse::<SourceFormat>().unwrap(), f);
        }
        assert!("csv".parse::<SourceFormat>().is_err());
    }
}

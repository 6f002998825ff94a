//! Shared domain model: questions, answers, documents, information units and
//! attributions.
//!
//! All text is NFC-normalized when a value is constructed through the
//! provided constructors, so string identity checks elsewhere in the crate
//! can compare canonical forms directly.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use unicode_normalization::UnicodeNormalization;

use crate::text::split_sentences;

/// NFC-normalizes a string.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
}

impl Question {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        Self {
            id: id.into(),
            text: nfc(text),
        }
    }
}

/// One sentence of the source document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceSentence {
    pub index: usize,
    pub text: String,
}

impl EvidenceSentence {
    pub fn new(index: usize, text: &str) -> Self {
        Self {
            index,
            text: nfc(text),
        }
    }

    /// Builds a document from sentences, indexing them by position.
    pub fn document<S: AsRef<str>>(sentences: &[S]) -> Vec<EvidenceSentence> {
        sentences
            .iter()
            .enumerate()
            .map(|(i, s)| EvidenceSentence::new(i, s.as_ref()))
            .collect()
    }
}

/// One sentence of the answer being attributed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerPart {
    pub index: usize,
    pub text: String,
}

impl AnswerPart {
    pub fn new(index: usize, text: &str) -> Self {
        Self {
            index,
            text: nfc(text),
        }
    }

    pub fn answer<S: AsRef<str>>(sentences: &[S]) -> Vec<AnswerPart> {
        sentences
            .iter()
            .enumerate()
            .map(|(i, s)| AnswerPart::new(i, s.as_ref()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitOrigin {
    /// Produced by a decomposition model.
    Decomposed,
    /// The answer sentence itself, used verbatim.
    Passthrough,
}

/// A fragment of an answer part that is used as an attribution query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationUnit {
    pub text: String,
    pub source_part_index: usize,
    pub origin: UnitOrigin,
}

impl InformationUnit {
    pub fn decomposed(text: &str, source_part_index: usize) -> Self {
        Self {
            text: nfc(text),
            source_part_index,
            origin: UnitOrigin::Decomposed,
        }
    }

    pub fn passthrough(part: &AnswerPart) -> Self {
        Self {
            text: part.text.clone(),
            source_part_index: part.index,
            origin: UnitOrigin::Passthrough,
        }
    }
}

/// A relevance score for one evidence sentence. Higher is more relevant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvidence {
    pub score: f64,
    pub evidence_index: usize,
}

impl ScoredEvidence {
    pub fn new(score: f64, evidence_index: usize) -> Self {
        Self {
            score,
            evidence_index,
        }
    }

    /// Ranking order: descending score, ties broken by lower evidence index.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.evidence_index.cmp(&other.evidence_index))
    }
}

/// Identifies what an attribution set (and a gold entry) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnitKey {
    /// A single answer sentence, by 0-based index.
    Part(usize),
    /// The answer as a whole.
    WholeAnswer,
}

impl UnitKey {
    pub const WHOLE_ANSWER_LABEL: &'static str = "answer";
}

impl fmt::Display for UnitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitKey::Part(i) => write!(f, "{i}"),
            UnitKey::WholeAnswer => f.write_str(Self::WHOLE_ANSWER_LABEL),
        }
    }
}

// Serialized as a bare integer for parts and as the string "answer" for the
// whole-answer marker.
impl Serialize for UnitKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            UnitKey::Part(i) => serializer.serialize_u64(*i as u64),
            UnitKey::WholeAnswer => serializer.serialize_str(Self::WHOLE_ANSWER_LABEL),
        }
    }
}

impl<'de> Deserialize<'de> for UnitKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KeyVisitor;

        impl Visitor<'_> for KeyVisitor {
            type Value = UnitKey;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative part index or the string \"answer\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<UnitKey, E> {
                Ok(UnitKey::Part(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<UnitKey, E> {
                usize::try_from(v)
                    .map(UnitKey::Part)
                    .map_err(|_| E::custom(format!("negative unit key {v}")))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<UnitKey, E> {
                if v == UnitKey::WHOLE_ANSWER_LABEL {
                    Ok(UnitKey::WholeAnswer)
                } else {
                    v.parse::<usize>()
                        .map(UnitKey::Part)
                        .map_err(|_| E::custom(format!("invalid unit key {v:?}")))
                }
            }
        }

        deserializer.deserialize_any(KeyVisitor)
    }
}

/// Ordered evidence attributed to one unit key.
///
/// Invariants: evidences sorted by [`ScoredEvidence::rank_cmp`], no repeated
/// evidence index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSet {
    pub unit_key: UnitKey,
    pub evidences: Vec<ScoredEvidence>,
}

impl AttributionSet {
    pub fn empty(unit_key: UnitKey) -> Self {
        Self {
            unit_key,
            evidences: Vec::new(),
        }
    }

    /// Sorts into rank order and keeps the first (best-ranked) occurrence of
    /// each evidence index.
    pub fn from_unsorted(unit_key: UnitKey, mut evidences: Vec<ScoredEvidence>) -> Self {
        evidences.sort_by(ScoredEvidence::rank_cmp);
        let mut seen = HashSet::new();
        evidences.retain(|e| seen.insert(e.evidence_index));
        Self {
            unit_key,
            evidences,
        }
    }

    pub fn len(&self) -> usize {
        self.evidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evidences.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.evidences.iter().map(|e| e.evidence_index).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Gold attributions per answer sentence.
    PerSentence,
    /// One gold attribution set for the whole answer.
    PerAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntry {
    pub unit_key: UnitKey,
    pub evidence_indices: BTreeSet<usize>,
}

/// One evaluation unit: a question, its answer, the source document and the
/// gold attributions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRecord {
    pub id: String,
    pub dataset: String,
    pub granularity: Granularity,
    pub question: Question,
    pub answer_parts: Vec<AnswerPart>,
    pub evidence: Vec<EvidenceSentence>,
    pub gold: Vec<GoldEntry>,
    /// Keys left out of evaluation (their answer sentence appears verbatim in
    /// the document).
    pub excluded_keys: BTreeSet<UnitKey>,
}

impl TaskRecord {
    /// The unit keys attributions are produced for.
    pub fn unit_keys(&self) -> Vec<UnitKey> {
        match self.granularity {
            Granularity::PerSentence => (0..self.answer_parts.len()).map(UnitKey::Part).collect(),
            Granularity::PerAnswer => vec![UnitKey::WholeAnswer],
        }
    }

    /// Unit keys that take part in evaluation.
    pub fn evaluated_keys(&self) -> Vec<UnitKey> {
        self.unit_keys()
            .into_iter()
            .filter(|k| !self.excluded_keys.contains(k))
            .collect()
    }

    /// Answer sentences covered by a unit key, in answer order.
    pub fn parts_for(&self, key: UnitKey) -> Vec<&AnswerPart> {
        match key {
            UnitKey::Part(i) => self.answer_parts.get(i).into_iter().collect(),
            UnitKey::WholeAnswer => self.answer_parts.iter().collect(),
        }
    }

    pub fn answer_text(&self) -> String {
        self.answer_parts
            .iter()
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn gold_for(&self, key: UnitKey) -> Option<&GoldEntry> {
        self.gold.iter().find(|g| g.unit_key == key)
    }
}

/// A broken invariant found by [`validate_record`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyQuestion,
    EmptyAnswerPart { position: usize },
    AnswerPartIndex { position: usize, index: usize },
    MultiSentenceAnswerPart { index: usize, sentences: usize },
    EmptyEvidence { position: usize },
    DuplicateEvidenceIndex { index: usize },
    EvidenceIndexNotContiguous { position: usize, index: usize },
    GoldEvidenceOutOfRange { unit_key: UnitKey, index: usize },
    GoldKeyGranularity { unit_key: UnitKey },
    GoldKeyOutOfRange { unit_key: UnitKey },
    DuplicateGoldKey { unit_key: UnitKey },
    PerAnswerGoldCount { count: usize },
}

impl Violation {
    /// Multi-sentence answer parts are a segmentation disagreement rather than
    /// broken structure; everything else makes the record unusable.
    pub fn is_structural(&self) -> bool {
        !matches!(self, Violation::MultiSentenceAnswerPart { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyQuestion => f.write_str("question text is empty"),
            Violation::EmptyAnswerPart { position } => {
                write!(f, "answer part at position {position} is empty")
            }
            Violation::AnswerPartIndex { position, index } => {
                write!(f, "answer part at position {position} has index {index}")
            }
            Violation::MultiSentenceAnswerPart { index, sentences } => {
                write!(f, "answer part {index} segments into {sentences} sentences")
            }
            Violation::EmptyEvidence { position } => {
                write!(f, "evidence at position {position} is empty")
            }
            Violation::DuplicateEvidenceIndex { index } => {
                write!(f, "evidence index {index} appears more than once")
            }
            Violation::EvidenceIndexNotContiguous { position, index } => {
                write!(f, "evidence at position {position} has index {index}")
            }
            Violation::GoldEvidenceOutOfRange { unit_key, index } => {
                write!(f, "gold for {unit_key} references missing evidence {index}")
            }
            Violation::GoldKeyGranularity { unit_key } => {
                write!(f, "gold key {unit_key} does not match the record granularity")
            }
            Violation::GoldKeyOutOfRange { unit_key } => {
                write!(f, "gold key {unit_key} references a missing answer part")
            }
            Violation::DuplicateGoldKey { unit_key } => {
                write!(f, "gold key {unit_key} appears more than once")
            }
            Violation::PerAnswerGoldCount { count } => {
                write!(f, "per-answer record has {count} gold entries, expected 1")
            }
        }
    }
}

/// Checks every record invariant. An empty result means the record is valid.
pub fn validate_record(record: &TaskRecord) -> Vec<Violation> {
    let mut out = Vec::new();

    if record.question.text.trim().is_empty() {
        out.push(Violation::EmptyQuestion);
    }

    for (position, part) in record.answer_parts.iter().enumerate() {
        if part.index != position {
            out.push(Violation::AnswerPartIndex {
                position,
                index: part.index,
            });
        }
        if part.text.trim().is_empty() {
            out.push(Violation::EmptyAnswerPart { position });
            continue;
        }
        let sentences = split_sentences(&part.text).len();
        if sentences > 1 {
            out.push(Violation::MultiSentenceAnswerPart {
                index: part.index,
                sentences,
            });
        }
    }

    let mut seen = HashSet::new();
    for (position, ev) in record.evidence.iter().enumerate() {
        if !seen.insert(ev.index) {
            out.push(Violation::DuplicateEvidenceIndex { index: ev.index });
        } else if ev.index != position {
            out.push(Violation::EvidenceIndexNotContiguous {
                position,
                index: ev.index,
            });
        }
        if ev.text.trim().is_empty() {
            out.push(Violation::EmptyEvidence { position });
        }
    }

    let mut keys = HashSet::new();
    for entry in &record.gold {
        if !keys.insert(entry.unit_key) {
            out.push(Violation::DuplicateGoldKey {
                unit_key: entry.unit_key,
            });
        }
        match (record.granularity, entry.unit_key) {
            (Granularity::PerSentence, UnitKey::Part(i)) if i >= record.answer_parts.len() => {
                out.push(Violation::GoldKeyOutOfRange {
                    unit_key: entry.unit_key,
                });
            }
            (Granularity::PerSentence, UnitKey::WholeAnswer)
            | (Granularity::PerAnswer, UnitKey::Part(_)) => {
                out.push(Violation::GoldKeyGranularity {
                    unit_key: entry.unit_key,
                });
            }
            _ => {}
        }
        for &index in &entry.evidence_indices {
            if !seen.contains(&index) {
                out.push(Violation::GoldEvidenceOutOfRange {
                    unit_key: entry.unit_key,
                    index,
                });
            }
        }
    }

    if record.granularity == Granularity::PerAnswer && record.gold.len() != 1 {
        out.push(Violation::PerAnswerGoldCount {
            count: record.gold.len(),
        });
    }

    out
}

//! Counters behind the decomposition ablations.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::attribute::KeyAttribution;
use crate::decompose::DecompositionResult;
use crate::model::{Granularity, TaskRecord, UnitKey};
use crate::text::SentenceClassifier;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationCounters {
    /// Units per answer sentence over every decomposed sentence.
    pub mean_units_per_sentence: Option<f64>,
    pub sentences: usize,
    /// Evaluated per-sentence keys without gold evidence.
    pub gold_empty_sentences: usize,
    /// Of those, the ones that still received some evidence.
    pub unattributable_sentences_attributed: usize,
    /// Per-sentence answer parts the classifier calls simple.
    pub classifier_simple_count: Option<usize>,
}

pub fn mean_units_per_sentence(decompositions: &[DecompositionResult]) -> Option<f64> {
    let sentences: usize = decompositions.iter().map(|d| d.per_sentence_units.len()).sum();
    let units: usize = decompositions.iter().map(DecompositionResult::total_units).sum();
    (sentences > 0).then(|| units as f64 / sentences as f64)
}

/// Mean units per sentence for each strategy present.
pub fn units_by_strategy(decompositions: &[DecompositionResult]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<String, Vec<DecompositionResult>> = BTreeMap::new();
    for d in decompositions {
        groups.entry(d.strategy.to_string()).or_default().push(d.clone());
    }
    groups.into_iter().filter_map(|(s, ds)| mean_units_per_sentence(&ds).map(|m| (s, m))).collect()
}

pub fn ablation_counters(
    records: &[TaskRecord],
    decompositions: &[DecompositionResult],
    attributions: &[KeyAttribution],
    classifier: Option<&dyn SentenceClassifier>,
) -> AblationCounters {
    let attributed: HashMap<(&str, UnitKey), bool> =
        attributions.iter().map(|a| ((a.record_id.as_str(), a.unit_key), !a.evidences.is_empty())).collect();
    let mut c = AblationCounters {
        mean_units_per_sentence: mean_units_per_sentence(decompositions),
        sentences: decompositions.iter().map(|d| d.per_sentence_units.len()).sum(),
        ..AblationCounters::default()
    };
    let mut simple = 0;
    for r in records.iter().filter(|r| r.granularity == Granularity::PerSentence) {
        for key in r.evaluated_keys() {
            if r.gold_for(key).is_none_or(|g| g.evidence_indices.is_empty()) {
                c.gold_empty_sentences += 1;
                if attributed.get(&(r.id.as_str(), key)).copied().unwrap_or(false) {
                    c.unattributable_sentences_attributed += 1;
                }
            }
        }
        if let Some(cls) = classifier {
            simple += r.answer_parts.iter().filter(|p| cls.is_simple(&p.text).unwrap_or(false)).count();
        }
    }
    c.classifier_simple_count = classifier.map(|_| simple);
    c
}

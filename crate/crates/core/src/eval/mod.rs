//! Scoring attributions against gold evidence.

pub mod ablation;
pub mod metrics;
pub mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attribute::KeyAttribution;
use crate::model::{TaskRecord, UnitKey};

pub use ablation::{ablation_counters, mean_units_per_sentence, units_by_strategy, AblationCounters};
pub use metrics::{aggregate, f1, unit_pr, Aggregate, Averaging, ScoredUnit};
pub use report::{canonical_json, emit_report, emit_reports, round4, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Ranked predictions cut at each k.
    Retrieval,
    /// The whole predicted set.
    Llm,
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "retrieval" => Ok(Self::Retrieval),
            "llm" => Ok(Self::Llm),
            other => Err(format!("unknown mode `{other}` (retrieval, llm)")),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Retrieval => "retrieval",
            Self::Llm => "llm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub strategy: String,
    pub attributor: String,
    pub mode: EvalMode,
    pub averaging: Averaging,
    pub per_k: BTreeMap<usize, Aggregate>,
    pub pooled: Option<Aggregate>,
    pub n_units_evaluated: usize,
    pub ablation: Option<AblationCounters>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("predictions for unknown records: {}", .0.join(", "))]
    UnknownRecords(Vec<String>),
    #[error("records without predictions: {}", .0.join(", "))]
    MissingRecords(Vec<String>),
    #[error("record {record_id}: no prediction for unit {unit_key}")]
    MissingKey { record_id: String, unit_key: UnitKey },
    #[error("record {record_id}: duplicate prediction for unit {unit_key}")]
    DuplicateKey { record_id: String, unit_key: UnitKey },
    #[error("no units to evaluate")]
    Empty,
}

/// Pairs every evaluated unit key with its prediction. Keys without a gold
/// entry have empty gold.
pub fn join_units(records: &[TaskRecord], attributions: &[KeyAttribution]) -> Result<Vec<ScoredUnit>, EvalError> {
    let known: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let predicted: BTreeSet<&str> = attributions.iter().map(|a| a.record_id.as_str()).collect();
    let unknown: Vec<String> = predicted.difference(&known).map(|s| s.to_string()).collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownRecords(unknown));
    }
    let missing: Vec<String> = known.difference(&predicted).map(|s| s.to_string()).collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingRecords(missing));
    }
    let mut by_key: HashMap<(&str, UnitKey), &KeyAttribution> = HashMap::new();
    for a in attributions {
        if by_key.insert((a.record_id.as_str(), a.unit_key), a).is_some() {
            return Err(EvalError::DuplicateKey { record_id: a.record_id.clone(), unit_key: a.unit_key });
        }
    }
    let mut units = Vec::new();
    for r in records {
        for key in r.evaluated_keys() {
            let a = by_key
                .get(&(r.id.as_str(), key))
                .ok_or_else(|| EvalError::MissingKey { record_id: r.id.clone(), unit_key: key })?;
            let gold = r.gold_for(key).map(|g| g.evidence_indices.clone()).unwrap_or_default();
            units.push(ScoredUnit::new(a.indices(), gold));
        }
    }
    Ok(units)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub mode: EvalMode,
    pub ks: Vec<usize>,
    pub averaging: Averaging,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { mode: EvalMode::Retrieval, ks: vec![1, 2, 4], averaging: Averaging::Macro }
    }
}

/// Scores one (strategy, attributor) run. Labels are taken from the first
/// attribution.
pub fn evaluate(records: &[TaskRecord], attributions: &[KeyAttribution], options: &EvalOptions) -> Result<MetricsReport, EvalError> {
    let units = join_units(records, attributions)?;
    if units.is_empty() {
        return Err(EvalError::Empty);
    }
    let (per_k, pooled) = match options.mode {
        EvalMode::Retrieval => (
            options.ks.iter().map(|&k| (k, aggregate(&units, Some(k), options.averaging))).collect(),
            None,
        ),
        EvalMode::Llm => (BTreeMap::new(), Some(aggregate(&units, None, options.averaging))),
    };
    let first = attributions.first();
    let mut datasets: Vec<&str> = records.iter().map(|r| r.dataset.as_str()).collect();
    datasets.sort_unstable();
    datasets.dedup();
    Ok(MetricsReport {
        dataset: datasets.join("+"),
        strategy: first.map(|a| a.strategy.to_string()).unwrap_or_default(),
        attributor: first.map(|a| a.attributor.clone()).unwrap_or_default(),
        mode: options.mode,
        averaging: options.averaging,
        per_k,
        pooled,
        n_units_evaluated: units.len(),
        ablation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribute::AttributedEvidence;
    use crate::decompose::StrategyKind;
    use crate::model::{AnswerPart, EvidenceSentence, GoldEntry, Granularity, Question};

    fn record(id: &str) -> TaskRecord {
        TaskRecord {
            id: id.into(),
            dataset: "t".into(),
            granularity: Granularity::PerSentence,
            question: Question::new(id, "Q?"),
            answer_parts: AnswerPart::answer(&["One.", "Two.", "Three."]),
            evidence: EvidenceSentence::document(&["A.", "B.", "C.", "D."]),
            gold: vec![
                GoldEntry { unit_key: UnitKey::Part(0), evidence_indices: [1, 2].into() },
                GoldEntry { unit_key: UnitKey::Part(1), evidence_indices: [3].into() },
            ],
            excluded_keys: [UnitKey::Part(2)].into(),
        }
    }

    fn att(id: &str, key: usize, ranked: &[usize]) -> KeyAttribution {
        KeyAttribution {
            record_id: id.into(),
            unit_key: UnitKey::Part(key),
            strategy: StrategyKind::Cog,
            attributor: "bm25".into(),
            evidences: ranked
                .iter()
                .enumerate()
                .map(|(i, &index)| AttributedEvidence { index, score: 1.0 / (i + 1) as f64, match_kind: None, similarity: None })
                .collect(),
            failures: vec![],
            unresolved: 0,
        }
    }

    #[test]
    fn retrieval_report() {
        let atts = vec![att("r", 0, &[1, 0, 2]), att("r", 1, &[0, 3]), att("r", 2, &[0])];
        let rep = evaluate(&[record("r")], &atts, &EvalOptions::default()).unwrap();
        assert_eq!(rep.n_units_evaluated, 2);
        assert_eq!(rep.strategy, "cog");
        // k=1: unit0 P1 R.5, unit1 P0 R0
        assert_eq!(rep.per_k[&1].precision, Some(0.5));
        assert_eq!(rep.per_k[&1].recall, Some(0.25));
        // k=4: unit0 P2/3 R1, unit1 P.5 R1
        assert_eq!(rep.per_k[&4].recall, Some(1.0));
        assert!(rep.pooled.is_none());
    }

    #[test]
    fn llm_report_uses_full_set() {
        let atts = vec![att("r", 0, &[1, 0, 2]), att("r", 1, &[0, 3]), att("r", 2, &[])];
        let opts = EvalOptions { mode: EvalMode::Llm, ..EvalOptions::default() };
        let rep = evaluate(&[record("r")], &atts, &opts).unwrap();
        assert!(rep.per_k.is_empty());
        assert_eq!(rep.pooled.unwrap().recall, Some(1.0));
    }

    #[test]
    fn mismatched_ids_are_listed() {
        let atts = vec![att("x", 0, &[1]), att("y", 0, &[1])];
        assert_eq!(
            join_units(&[record("r")], &atts),
            Err(EvalError::UnknownRecords(vec!["x".into(), "y".into()]))
        );
        assert_eq!(join_units(&[record("r")], &[]), Err(EvalError::MissingRecords(vec!["r".into()])));
        assert!(matches!(join_units(&[record("r")], &[att("r", 0, &[])]), Err(EvalError::MissingKey { .. })));
    }
}

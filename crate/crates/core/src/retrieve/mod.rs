//! Evidence scoring and the greedy merge of per-unit rankings.

mod bm25;
mod service;

use thiserror::Error;

pub use bm25::{bm25_tokenize, Bm25Index, Bm25Params};
pub use service::{CrossEncoderScorer, EmbeddingScorer, ServiceEndpoint, Similarity};

use crate::http::HttpError;
use crate::model::{AttributionSet, EvidenceSentence, ScoredEvidence, UnitKey};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("malformed scorer response: {0}")]
    Malformed(String),
    #[error("scorer returned {got} {what} for {expected} inputs")]
    CountMismatch { what: &'static str, expected: usize, got: usize },
    #[error("vector dimension {got} differs from {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Scores every evidence sentence against each query. Higher means more
/// relevant; scores of different backends are not comparable.
pub trait EvidenceScorer: Send + Sync {
    fn name(&self) -> &str;

    /// One list per query, aligned with `evidence`.
    fn score_batch(
        &self,
        queries: &[String],
        evidence: &[EvidenceSentence],
    ) -> Result<Vec<Vec<ScoredEvidence>>, ScoreError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Bm25Scorer {
    pub params: Bm25Params,
}

impl EvidenceScorer for Bm25Scorer {
    fn name(&self) -> &str {
        "bm25"
    }

    fn score_batch(
        &self,
        queries: &[String],
        evidence: &[EvidenceSentence],
    ) -> Result<Vec<Vec<ScoredEvidence>>, ScoreError> {
        let index = Bm25Index::build(evidence, self.params);
        Ok(queries.iter().map(|q| index.score_evidence(q, evidence)).collect())
    }
}

/// Walks the units in order; each takes its best-scoring evidence not taken
/// by an earlier unit. Equal scores go to the lower evidence index, and
/// scores that are NaN or negative infinity are never taken. The result is
/// sorted by descending score.
pub fn greedy_merge(unit_key: UnitKey, per_unit: &[Vec<ScoredEvidence>]) -> AttributionSet {
    let mut taken: Vec<ScoredEvidence> = Vec::with_capacity(per_unit.len());
    for scores in per_unit {
        let mut best: Option<ScoredEvidence> = None;
        let mut best_score = f64::NEG_INFINITY;
        for e in scores {
            if taken.iter().any(|t| t.evidence_index == e.evidence_index) {
                continue;
            }
            let tie_wins = e.score == best_score && best.is_some_and(|b| e.evidence_index < b.evidence_index);
            if e.score > best_score || tie_wins {
                best_score = e.score;
                best = Some(*e);
            }
        }
        taken.extend(best);
    }
    AttributionSet::from_unsorted(unit_key, taken)
}

/// The `k` best-ranked evidences.
pub fn top_k(set: &AttributionSet, k: usize) -> AttributionSet {
    AttributionSet {
        unit_key: set.unit_key,
        evidences: set.evidences.iter().take(k).copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn row(scores: &[f64]) -> Vec<ScoredEvidence> {
        scores.iter().enumerate().map(|(i, &s)| ScoredEvidence::new(s, i)).collect()
    }

    fn pairs(set: &AttributionSet) -> Vec<(f64, usize)> {
        set.evidences.iter().map(|e| (e.score, e.evidence_index)).collect()
    }

    #[test]
    fn single_unit_takes_max() {
        let set = greedy_merge(UnitKey::Part(0), &[row(&[0.9, 0.1])]);
        assert_eq!(pairs(&set), vec![(0.9, 0)]);
    }

    #[test]
    fn second_unit_skips_taken_evidence() {
        let set = greedy_merge(UnitKey::Part(0), &[row(&[0.9, 0.5]), row(&[0.8, 0.7])]);
        assert_eq!(pairs(&set), vec![(0.9, 0), (0.7, 1)]);
    }

    #[test]
    fn no_units_no_evidence() {
        assert!(greedy_merge(UnitKey::WholeAnswer, &[]).is_empty());
    }

    #[test]
    fn exhausted_evidence_contributes_nothing() {
        let set = greedy_merge(UnitKey::Part(0), &[row(&[1.0]), row(&[2.0]), row(&[3.0])]);
        assert_eq!(pairs(&set), vec![(1.0, 0)]);
    }

    #[test]
    fn non_finite_scores() {
        let set = greedy_merge(UnitKey::Part(0), &[row(&[f64::NAN, f64::NEG_INFINITY]), row(&[f64::NAN, 0.0])]);
        assert_eq!(pairs(&set), vec![(0.0, 1)]);
    }

    #[test]
    fn ties_prefer_lower_index_in_any_input_order() {
        let unit = vec![ScoredEvidence::new(0.5, 3), ScoredEvidence::new(0.5, 1)];
        assert_eq!(greedy_merge(UnitKey::Part(0), &[unit]).indices(), vec![1]);
    }

    #[test]
    fn top_k_truncates_without_touching_input() {
        let set = AttributionSet::from_unsorted(
            UnitKey::Part(0),
            row(&[0.4, 0.3, 0.2, 0.1]),
        );
        assert_eq!(top_k(&set, 2).indices(), vec![0, 1]);
        assert_eq!(set.len(), 4);
        let one = AttributionSet::from_unsorted(UnitKey::Part(0), row(&[0.4]));
        assert_eq!(top_k(&one, 4).len(), 1);
    }

    #[test]
    fn top_k_ties_are_deterministic() {
        let scores = row(&[0.5, 0.5, 0.5, 0.5]);
        let mut reversed = scores.clone();
        reversed.reverse();
        let a = top_k(&AttributionSet::from_unsorted(UnitKey::Part(0), scores), 2);
        let b = top_k(&AttributionSet::from_unsorted(UnitKey::Part(0), reversed), 2);
        assert_eq!(a, b);
        assert_eq!(a.indices(), vec![0, 1]);
    }

    #[test]
    fn bm25_scorer_batches() {
        let ev = EvidenceSentence::document(&["red apples", "green pears"]);
        let out = Bm25Scorer::default()
            .score_batch(&["apples".into(), "pears".into()], &ev)
            .unwrap();
        assert!(out[0][0].score > 0.0 && out[0][1].score == 0.0);
        assert!(out[1][1].score > 0.0 && out[1][0].score == 0.0);
    }

    /// Line-by-line reading of the merge pseudocode: a running list L, and
    /// per unit a scan over evidences in index order keeping the strict
    /// maximum among those not in L.
    fn pseudocode(matrix: &[Vec<f64>]) -> Vec<(f64, usize)> {
        let mut l: Vec<(f64, usize)> = Vec::new();
        for unit_scores in matrix {
            let mut max_score = f64::NEG_INFINITY;
            let mut best_evidence = None;
            for (e, &s) in unit_scores.iter().enumerate() {
                let in_l = l.iter().any(|&(_, x)| x == e);
                if s > max_score && !in_l {
                    max_score = s;
                    best_evidence = Some(e);
                }
            }
            if let Some(e) = best_evidence {
                l.push((max_score, e));
            }
        }
        l.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        l
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=10).prop_flat_map(|n| {
            let cell = prop_oneof![(-3i32..=3).prop_map(|v| v as f64 / 2.0), -10.0f64..10.0];
            prop::collection::vec(prop::collection::vec(cell, n), 0..=6)
        })
    }

    proptest! {
        #[test]
        fn matches_pseudocode(m in matrix()) {
            let rows: Vec<_> = m.iter().map(|r| row(r)).collect();
            let set = greedy_merge(UnitKey::Part(0), &rows);
            prop_assert_eq!(pairs(&set), pseudocode(&m));
        }

        #[test]
        fn merge_invariants(m in matrix()) {
            let rows: Vec<_> = m.iter().map(|r| row(r)).collect();
            let set = greedy_merge(UnitKey::Part(0), &rows);
            let mut idx = set.indices();
            idx.sort_unstable();
            idx.dedup();
            prop_assert_eq!(idx.len(), set.len());
            prop_assert!(set.len() <= m.len());
            prop_assert!(set.evidences.windows(2).all(|w| w[0].score >= w[1].score));
        }

        #[test]
        fn top_k_is_prefix(m in matrix(), k in 1usize..6) {
            let rows: Vec<_> = m.iter().map(|r| row(r)).collect();
            let set = greedy_merge(UnitKey::Part(0), &rows);
            let cut = top_k(&set, k);
            prop_assert_eq!(cut.len(), k.min(set.len()));
            prop_assert_eq!(&cut.evidences[..], &set.evidences[..cut.len()]);
        }
    }
}

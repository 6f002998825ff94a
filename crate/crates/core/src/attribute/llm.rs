//! Evidence selection by a chat model over a BM25 candidate pool.

use serde::{Deserialize, Serialize};

use super::resolve::{parse_and_resolve, Resolution};
use crate::model::{EvidenceSentence, InformationUnit, ScoredEvidence, TaskRecord, UnitKey};
use crate::retrieve::{Bm25Index, Bm25Params};

pub const ATTRIBUTION_INSTRUCTIONS: &str = "Given a question, information units relevant to the question and retrieved evidences, retrieve sentences from the evidence which support the information units. The sentences which support the information unit will be considered attributions to the information unit. The sentence should provide a reasoning to the information unit, question and answer.

Output a list of retrieved sentences. Output only a valid list and no other text. If no sentence is supported, return empty list []. Be precise in identifying sentences that support the information units by returning only highly relevant sentences. Return a list of length 0, 1 or 2. Do not return more. DO NOT PARAPHRASE THE SENTENCES FROM THE RETRIEVED EVIDENCES. OUTPUT EXACT SENTENCES IN THE LIST. Sort the returned list based on the relevance to the information unit. The highly relevant evidence should appear as the first element.";

pub const OUTPUT_FORMAT_LINE: &str = "OUTPUT FORMAT: [\"sentence 23\", \"sentence 34\", \"sentence 40\"]";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmAttributorConfig {
    pub candidate_pool_size: usize,
    pub max_returned_per_call: usize,
    pub fuzzy_threshold: f64,
    /// One call per unit instead of one per unit key.
    pub per_unit_calls: bool,
    pub bm25: Bm25Params,
}

impl Default for LlmAttributorConfig {
    fn default() -> Self {
        Self {
            candidate_pool_size: 100,
            max_returned_per_call: 2,
            fuzzy_threshold: 0.9,
            per_unit_calls: false,
            bm25: Bm25Params::default(),
        }
    }
}

impl LlmAttributorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.candidate_pool_size == 0 {
            return Err("candidate pool size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.fuzzy_threshold) {
            return Err("fuzzy threshold must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Candidates for a unit key: the whole document when it fits in the pool,
/// otherwise the best BM25 matches for the key's answer sentences, best
/// first. Independent of how the answer was decomposed.
pub fn select_candidates(record: &TaskRecord, key: UnitKey, pool: usize, params: Bm25Params) -> Vec<EvidenceSentence> {
    if record.evidence.len() <= pool {
        return record.evidence.clone();
    }
    let query = record
        .parts_for(key)
        .iter()
        .map(|p| p.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let index = Bm25Index::build(&record.evidence, params);
    let mut ranked: Vec<(ScoredEvidence, usize)> = index
        .score_evidence(&query, &record.evidence)
        .into_iter()
        .enumerate()
        .map(|(pos, s)| (s, pos))
        .collect();
    ranked.sort_by(|a, b| a.0.rank_cmp(&b.0));
    ranked.truncate(pool);
    ranked.into_iter().map(|(_, pos)| record.evidence[pos].clone()).collect()
}

fn json_list<'a>(items: impl Iterator<Item = &'a str>) -> String {
    serde_json::to_string(&items.collect::<Vec<_>>()).expect("strings serialize")
}

pub fn attribution_prompt(
    question: &str,
    answer: &str,
    units: &[InformationUnit],
    candidates: &[EvidenceSentence],
) -> String {
    format!(
        "{ATTRIBUTION_INSTRUCTIONS}\n\n{OUTPUT_FORMAT_LINE}\n\nQUESTION: {question}\n\nANSWER: {answer}\n\nINFORMATION UNITS: {}\n\nEVIDENCES: {}\n\nOutput a valid python list from now on\n\nOUTPUT LIST: ",
        json_list(units.iter().map(|u| u.text.as_str())),
        json_list(candidates.iter().map(|c| c.text.as_str())),
    )
}

/// Concatenates call results in order, keeping first occurrences, and gives
/// rank r the score 1/(r+1).
pub fn rank_scores(calls: &[Resolution]) -> Vec<ScoredEvidence> {
    let mut indices: Vec<usize> = Vec::new();
    for r in calls {
        for e in &r.resolved {
            if !indices.contains(&e.evidence_index) {
                indices.push(e.evidence_index);
            }
        }
    }
    indices
        .into_iter()
        .enumerate()
        .map(|(rank, idx)| ScoredEvidence::new(1.0 / (rank as f64 + 1.0), idx))
        .collect()
}

pub fn resolve_reply(raw: &str, candidates: &[EvidenceSentence], config: &LlmAttributorConfig) -> Resolution {
    parse_and_resolve(raw, candidates, config.fuzzy_threshold, config.max_returned_per_call)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AnswerPart, Granularity, Question};

    fn record(evidence: &[&str], answer: &[&str]) -> TaskRecord {
        TaskRecord {
            id: "r".into(),
            dataset: "t".into(),
            granularity: Granularity::PerSentence,
            question: Question::new("q", "Which downstream tasks are used?"),
            answer_parts: AnswerPart::answer(answer),
            evidence: EvidenceSentence::document(evidence),
            gold: vec![],
            excluded_keys: Default::default(),
        }
    }

    #[test]
    fn small_documents_are_passed_whole_in_order() {
        let texts: Vec<String> = (0..50).map(|i| format!("sentence {i}.")).collect();
        let r = record(&texts.iter().map(String::as_str).collect::<Vec<_>>(), &["sentence 49."]);
        let c = select_candidates(&r, UnitKey::Part(0), 100, Bm25Params::default());
        assert_eq!(c, r.evidence);
    }

    #[test]
    fn large_documents_are_ranked_by_answer_overlap() {
        let mut texts: Vec<String> = (0..10).map(|i| format!("filler number {i} about nothing.")).collect();
        texts[2] = "GENIA bio entity recognition annotated abstracts.".into();
        texts[7] = "WNUT named entity recognition on tweets.".into();
        let r = record(
            &texts.iter().map(String::as_str).collect::<Vec<_>>(),
            &["GENIA bio entity recognition and WNUT named entity recognition."],
        );
        let c = select_candidates(&r, UnitKey::Part(0), 3, Bm25Params::default());
        assert_eq!(c.len(), 3);
        let mut top2: Vec<usize> = c[..2].iter().map(|e| e.index).collect();
        top2.sort_unstable();
        assert_eq!(top2, vec![2, 7]);
    }

    #[test]
    fn pool_does_not_depend_on_units() {
        let texts: Vec<String> = (0..30).map(|i| format!("term{} shared words {i}.", i % 4)).collect();
        let r = record(&texts.iter().map(String::as_str).collect::<Vec<_>>(), &["term1 words.", "term2."]);
        let a = select_candidates(&r, UnitKey::Part(0), 5, Bm25Params::default());
        let b = select_candidates(&r, UnitKey::Part(0), 5, Bm25Params::default());
        assert_eq!(a, b);
    }

    #[test]
    fn prompt_layout() {
        let units = vec![InformationUnit::decomposed("CoNLL chunking is used.", 0), InformationUnit::decomposed("GENIA is used.", 0)];
        let texts: Vec<String> = (0..100).map(|i| format!("Evidence {i}.")).collect();
        let cands = EvidenceSentence::document(&texts);
        let p = attribution_prompt("Which tasks?", "Chunking and GENIA.", &units, &cands);
        assert!(p.starts_with(ATTRIBUTION_INSTRUCTIONS));
        assert!(p.contains("The highly relevant evidence should appear as the first element."));
        assert!(p.contains(OUTPUT_FORMAT_LINE));
        assert!(p.contains("INFORMATION UNITS: [\"CoNLL chunking is used.\",\"GENIA is used.\"]"));
        for t in &texts {
            assert!(p.contains(&format!("\"{t}\"")));
        }
        let order = ["QUESTION: Which tasks?", "ANSWER: Chunking and GENIA.", "INFORMATION UNITS:", "EVIDENCES:", "OUTPUT LIST: "];
        let positions: Vec<usize> = order.iter().map(|s| p.find(s).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pseudo_scores_follow_rank() {
        let c = EvidenceSentence::document(&["A.", "B.", "C."]);
        let cfg = LlmAttributorConfig::default();
        let calls = vec![resolve_reply("[\"C.\", \"A.\"]", &c, &cfg), resolve_reply("[\"A.\", \"B.\"]", &c, &cfg)];
        let s = rank_scores(&calls);
        assert_eq!(s, vec![ScoredEvidence::new(1.0, 2), ScoredEvidence::new(0.5, 0), ScoredEvidence::new(1.0 / 3.0, 1)]);
    }
}

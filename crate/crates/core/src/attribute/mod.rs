//! Attributors: map the units of each unit key to evidence sentences.

mod llm;
mod resolve;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use llm::{
    attribution_prompt, rank_scores, resolve_reply, select_candidates, LlmAttributorConfig, ATTRIBUTION_INSTRUCTIONS,
    OUTPUT_FORMAT_LINE,
};
pub use resolve::{normalize_for_match, parse_and_resolve, resolve_one, similarity, MatchKind, Resolution, ResolvedEvidence};

use crate::decompose::{DecompositionResult, StrategyKind};
use crate::gateway::{ChatSettings, GatewayError, LlmGateway};
use crate::model::{AttributionSet, InformationUnit, ScoredEvidence, TaskRecord, UnitKey};
use crate::retrieve::{greedy_merge, EvidenceScorer, ScoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributedEvidence {
    pub index: usize,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_kind: Option<MatchKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

/// Attribution output for one unit key of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyAttribution {
    pub record_id: String,
    pub unit_key: UnitKey,
    pub strategy: StrategyKind,
    pub attributor: String,
    pub evidences: Vec<AttributedEvidence>,
    #[serde(default)]
    pub failures: Vec<String>,
    #[serde(default)]
    pub unresolved: usize,
}

impl KeyAttribution {
    pub fn set(&self) -> AttributionSet {
        AttributionSet {
            unit_key: self.unit_key,
            evidences: self.evidences.iter().map(|e| ScoredEvidence::new(e.score, e.index)).collect(),
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.evidences.iter().map(|e| e.index).collect()
    }
}

#[derive(Debug, Error)]
pub enum AttributeError {
    #[error("record {record_id}: decomposition belongs to {found}")]
    Mismatch { record_id: String, found: String },
    #[error("record {record_id}: {source}")]
    Scorer {
        record_id: String,
        #[source]
        source: ScoreError,
    },
    #[error("record {record_id}, key {key}: {source}")]
    Gateway {
        record_id: String,
        key: UnitKey,
        #[source]
        source: GatewayError,
    },
}

pub trait Attributor: Send + Sync {
    fn name(&self) -> &str;

    /// One entry per unit key of the record, in key order.
    fn attribute(&self, record: &TaskRecord, decomposition: &DecompositionResult) -> Result<Vec<KeyAttribution>, AttributeError>;
}

/// Units for a key in answer order.
pub fn units_for_key(decomposition: &DecompositionResult, key: UnitKey) -> Vec<InformationUnit> {
    match key {
        UnitKey::Part(i) => decomposition.units_for(i).to_vec(),
        UnitKey::WholeAnswer => decomposition.per_sentence_units.values().flatten().cloned().collect(),
    }
}

fn check_pair(record: &TaskRecord, decomposition: &DecompositionResult) -> Result<(), AttributeError> {
    if record.id != decomposition.record_id {
        return Err(AttributeError::Mismatch { record_id: record.id.clone(), found: decomposition.record_id.clone() });
    }
    Ok(())
}

/// Scores every unit against the document and merges per key.
pub struct RetrievalAttributor {
    pub scorer: Arc<dyn EvidenceScorer>,
}

impl Attributor for RetrievalAttributor {
    fn name(&self) -> &str {
        self.scorer.name()
    }

    fn attribute(&self, record: &TaskRecord, decomposition: &DecompositionResult) -> Result<Vec<KeyAttribution>, AttributeError> {
        check_pair(record, decomposition)?;
        let keys = record.unit_keys();
        let per_key: Vec<Vec<InformationUnit>> = keys.iter().map(|k| units_for_key(decomposition, *k)).collect();
        let mut queries: Vec<String> = Vec::new();
        for u in per_key.iter().flatten() {
            if !queries.contains(&u.text) {
                queries.push(u.text.clone());
            }
        }
        let scores = if queries.is_empty() {
            Vec::new()
        } else {
            self.scorer
                .score_batch(&queries, &record.evidence)
                .map_err(|source| AttributeError::Scorer { record_id: record.id.clone(), source })?
        };
        Ok(keys
            .iter()
            .zip(&per_key)
            .map(|(key, units)| {
                let rows: Vec<Vec<ScoredEvidence>> = units
                    .iter()
                    .map(|u| scores[queries.iter().position(|q| *q == u.text).expect("query listed")].clone())
                    .collect();
                let set = greedy_merge(*key, &rows);
                KeyAttribution {
                    record_id: record.id.clone(),
                    unit_key: *key,
                    strategy: decomposition.strategy,
                    attributor: self.name().to_string(),
                    evidences: set
                        .evidences
                        .iter()
                        .map(|e| AttributedEvidence { index: e.evidence_index, score: e.score, match_kind: None, similarity: None })
                        .collect(),
                    failures: Vec::new(),
                    unresolved: 0,
                }
            })
            .collect())
    }
}

pub struct LlmAttributor {
    pub gateway: Arc<LlmGateway>,
    pub chat: ChatSettings,
    pub config: LlmAttributorConfig,
}

impl LlmAttributor {
    fn attribute_key(&self, record: &TaskRecord, key: UnitKey, units: &[InformationUnit], strategy: StrategyKind) -> Result<KeyAttribution, AttributeError> {
        let mut out = KeyAttribution {
            record_id: record.id.clone(),
            unit_key: key,
            strategy,
            attributor: self.name().to_string(),
            evidences: Vec::new(),
            failures: Vec::new(),
            unresolved: 0,
        };
        if units.is_empty() {
            return Ok(out);
        }
        let candidates = select_candidates(record, key, self.config.candidate_pool_size, self.config.bm25);
        if candidates.is_empty() {
            out.failures.push("no candidate evidence".into());
            return Ok(out);
        }
        let batches: Vec<&[InformationUnit]> = if self.config.per_unit_calls {
            units.chunks(1).collect()
        } else {
            vec![units]
        };
        let answer = record.answer_text();
        let mut calls = Vec::with_capacity(batches.len());
        for batch in batches {
            let prompt = attribution_prompt(&record.question.text, &answer, batch, &candidates);
            let reply = self.chat.user_request(prompt).and_then(|r| self.gateway.complete(&r));
            match reply {
                Ok(reply) => {
                    let res = resolve_reply(&reply.content, &candidates, &self.config);
                    if let Some(e) = &res.parse_error {
                        out.failures.push(format!("unparseable reply: {e}"));
                    }
                    out.unresolved += res.unresolved;
                    calls.push(res);
                }
                Err(source @ GatewayError::CacheMiss { .. }) => {
                    return Err(AttributeError::Gateway { record_id: record.id.clone(), key, source });
                }
                Err(e) => out.failures.push(e.to_string()),
            }
        }
        let kinds: Vec<&ResolvedEvidence> = calls.iter().flat_map(|c| &c.resolved).collect();
        out.evidences = rank_scores(&calls)
            .into_iter()
            .map(|s| {
                let r = kinds.iter().find(|r| r.evidence_index == s.evidence_index).expect("ranked from calls");
                AttributedEvidence {
                    index: s.evidence_index,
                    score: s.score,
                    match_kind: Some(r.match_kind),
                    similarity: Some(r.similarity),
                }
            })
            .collect();
        Ok(out)
    }
}

impl Attributor for LlmAttributor {
    fn name(&self) -> &str {
        "llm"
    }

    fn attribute(&self, record: &TaskRecord, decomposition: &DecompositionResult) -> Result<Vec<KeyAttribution>, AttributeError> {
        check_pair(record, decomposition)?;
        record
            .unit_keys()
            .into_par_iter()
            .map(|key| self.attribute_key(record, key, &units_for_key(decomposition, key), decomposition.strategy))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    use serde_json::{json, Value};

    use super::*;
    use crate::decompose::{Decomposer, NilDecomposer};
    use crate::gateway::{GatewayConfig, GatewayMode};
    use crate::http::{HttpReply, OfflineTransport, Transport, TransportError};
    use crate::model::{AnswerPart, EvidenceSentence, Granularity, Question};
    use crate::retrieve::Bm25Scorer;

    fn record(granularity: Granularity) -> TaskRecord {
        TaskRecord {
            id: "r".into(),
            dataset: "t".into(),
            granularity,
            question: Question::new("q", "paint cast iron"),
            answer_parts: AnswerPart::answer(&[
                "To paint cast iron, you should first coat it with oil-based primer to create a smooth surface and help the paint adhere.",
                "You can find cast iron paint on Amazon.",
            ]),
            evidence: EvidenceSentence::document(&[
                "Coat the cast iron with oil-based primer.",
                "Priming the metal creates a smooth surface and will help the paint adhere.",
                "Read on for our complete guide to painting cast iron easily at home.",
            ]),
            gold: vec![],
            excluded_keys: Default::default(),
        }
    }

    struct Scripted {
        replies: Mutex<Vec<String>>,
        prompts: Mutex<Vec<String>>,
        calls: AtomicUsize,
    }

    impl Transport for Scripted {
        fn post_json(&self, _: &str, _: &[(String, String)], body: &Value) -> Result<HttpReply, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let prompt = body["messages"][0]["content"].as_str().unwrap().to_string();
            let reply = {
                let replies = self.replies.lock().unwrap();
                replies.iter().find(|r| prompt.contains(r.split('|').next().unwrap())).cloned()
            };
            self.prompts.lock().unwrap().push(prompt);
            let content = reply.map(|r| r.split('|').nth(1).unwrap().to_string()).unwrap_or_else(|| "[]".into());
            Ok(HttpReply::ok(json!({"choices": [{"message": {"content": content}}]}).to_string()))
        }
    }

    fn llm(replies: &[&str]) -> (LlmAttributor, Arc<Scripted>) {
        let t = Arc::new(Scripted {
            replies: Mutex::new(replies.iter().map(|s| s.to_string()).collect()),
            prompts: Mutex::new(Vec::new()),
            calls: AtomicUsize::new(0),
        });
        let cfg = GatewayConfig { mode: GatewayMode::Live, ..GatewayConfig::default() };
        let gateway = Arc::new(LlmGateway::new(cfg, t.clone()).unwrap());
        (LlmAttributor { gateway, chat: ChatSettings::new("m"), config: LlmAttributorConfig::default() }, t)
    }

    #[test]
    fn retrieval_per_sentence_and_per_answer() {
        let a = RetrievalAttributor { scorer: Arc::new(Bm25Scorer::default()) };
        let r = record(Granularity::PerSentence);
        let d = NilDecomposer.decompose(&r).unwrap();
        let out = a.attribute(&r, &d).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].unit_key, UnitKey::Part(0));
        assert_eq!(out[0].evidences.len(), 1);

        let r = record(Granularity::PerAnswer);
        let out = a.attribute(&r, &d).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].unit_key, UnitKey::WholeAnswer);
        assert_eq!(out[0].evidences.len(), 2);
        assert!(out[0].evidences[0].score >= out[0].evidences[1].score);
    }

    #[test]
    fn llm_resolves_rank_ordered() {
        let (a, t) = llm(&[
            "INFORMATION UNITS: [\"To paint cast iron|[\"Coat the cast iron with oil-based primer.\", \"priming the metal creates a smooth surface and will help the paint adhere\"]",
        ]);
        let r = record(Granularity::PerSentence);
        let d = NilDecomposer.decompose(&r).unwrap();
        let out = a.attribute(&r, &d).unwrap();
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
        assert_eq!(out[0].indices(), vec![0, 1]);
        assert_eq!(out[0].evidences[1].match_kind, Some(MatchKind::Normalized));
        assert_eq!(out[0].evidences[0].score, 1.0);
        assert!(out[1].evidences.is_empty());
    }

    #[test]
    fn empty_units_make_no_call() {
        let (a, t) = llm(&[]);
        let r = record(Granularity::PerSentence);
        let mut d = NilDecomposer.decompose(&r).unwrap();
        d.per_sentence_units.insert(1, vec![]);
        d.per_sentence_units.insert(0, vec![]);
        let out = a.attribute(&r, &d).unwrap();
        assert_eq!(t.calls.load(Ordering::SeqCst), 0);
        assert!(out.iter().all(|k| k.evidences.is_empty() && k.failures.is_empty()));
    }

    #[test]
    fn per_unit_calls() {
        let (mut a, t) = llm(&[]);
        a.config.per_unit_calls = true;
        let r = record(Granularity::PerAnswer);
        let d = NilDecomposer.decompose(&r).unwrap();
        a.attribute(&r, &d).unwrap();
        assert_eq!(t.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn unparseable_reply_is_recorded() {
        let (a, _) = llm(&["INFORMATION UNITS: [\"To paint|no supporting evidence"]);
        let r = record(Granularity::PerSentence);
        let d = NilDecomposer.decompose(&r).unwrap();
        let out = a.attribute(&r, &d).unwrap();
        assert_eq!(out[0].failures.len(), 1);
        assert!(out[0].evidences.is_empty());
    }

    #[test]
    fn replay_miss_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GatewayConfig { mode: GatewayMode::Replay, cache_dir: Some(dir.path().into()), ..GatewayConfig::default() };
        let gateway = Arc::new(LlmGateway::new(cfg, Arc::new(OfflineTransport)).unwrap());
        let a = LlmAttributor { gateway, chat: ChatSettings::new("m"), config: LlmAttributorConfig::default() };
        let r = record(Granularity::PerSentence);
        let d = NilDecomposer.decompose(&r).unwrap();
        assert!(matches!(a.attribute(&r, &d), Err(AttributeError::Gateway { .. })));
    }

    #[test]
    fn mismatched_decomposition() {
        let a = RetrievalAttributor { scorer: Arc::new(Bm25Scorer::default()) };
        let r = record(Granularity::PerSentence);
        let mut d = NilDecomposer.decompose(&r).unwrap();
        d.record_id = "other".into();
        assert!(matches!(a.attribute(&r, &d), Err(AttributeError::Mismatch { .. })));
    }

    #[test]
    fn key_attribution_json_shape() {
        let k = KeyAttribution {
            record_id: "r".into(),
            unit_key: UnitKey::WholeAnswer,
            strategy: StrategyKind::Cog,
            attributor: "llm".into(),
            evidences: vec![AttributedEvidence { index: 3, score: 1.0, match_kind: Some(MatchKind::Exact), similarity: Some(1.0) }],
            failures: vec![],
            unresolved: 0,
        };
        let v = serde_json::to_value(&k).unwrap();
        assert_eq!(v["unit_key"], json!("answer"));
        assert_eq!(v["evidences"][0]["match_kind"], json!("exact"));
        let back: KeyAttribution = serde_json::from_value(v).unwrap();
        assert_eq!(back, k);
    }
}

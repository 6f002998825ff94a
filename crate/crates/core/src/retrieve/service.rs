//! Scorers backed by external embedding and cross-encoder services.

use std::sync::Arc;

use serde::Deserialize;
use serde_json::json;

use super::{EvidenceScorer, ScoreError};
use crate::http::{RetryPolicy, Transport};
use crate::model::{EvidenceSentence, ScoredEvidence};

#[derive(Clone)]
pub struct ServiceEndpoint {
    pub url: String,
    pub transport: Arc<dyn Transport>,
    pub retry: RetryPolicy,
}

impl ServiceEndpoint {
    fn post<T: for<'de> Deserialize<'de>>(&self, body: serde_json::Value) -> Result<T, ScoreError> {
        let reply = self.retry.post(self.transport.as_ref(), &self.url, &[], &body)?;
        serde_json::from_str(&reply.body).map_err(|e| ScoreError::Malformed(format!("{e}: {}", reply.body)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    #[default]
    Dot,
    Cosine,
}

impl Similarity {
    pub fn apply(self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        match self {
            Similarity::Dot => dot,
            Similarity::Cosine => {
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    0.0
                } else {
                    dot / (na * nb)
                }
            }
        }
    }
}

/// `POST {"texts": [...]}` returning `{"vectors": [[...]]}`.
pub struct EmbeddingScorer {
    pub endpoint: ServiceEndpoint,
    pub similarity: Similarity,
}

#[derive(Deserialize)]
struct Vectors {
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingScorer {
    fn embed(&self, texts: Vec<&str>) -> Result<Vec<Vec<f64>>, ScoreError> {
        let expected = texts.len();
        let Vectors { vectors } = self.endpoint.post(json!({ "texts": texts }))?;
        if vectors.len() != expected {
            return Err(ScoreError::CountMismatch { what: "vectors", expected, got: vectors.len() });
        }
        if let Some(first) = vectors.first() {
            let dim = first.len();
            if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
                return Err(ScoreError::Dimension { expected: dim, got: bad.len() });
            }
        }
        Ok(vectors)
    }
}

impl EvidenceScorer for EmbeddingScorer {
    fn name(&self) -> &str {
        "embedding"
    }

    fn score_batch(
        &self,
        queries: &[String],
        evidence: &[EvidenceSentence],
    ) -> Result<Vec<Vec<ScoredEvidence>>, ScoreError> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let texts = queries
            .iter()
            .map(String::as_str)
            .chain(evidence.iter().map(|e| e.text.as_str()))
            .collect();
        let vectors = self.embed(texts)?;
        let (q, ev) = vectors.split_at(queries.len());
        Ok(q.iter()
            .map(|qv| {
                ev.iter()
                    .zip(evidence)
                    .map(|(v, e)| ScoredEvidence::new(self.similarity.apply(qv, v), e.index))
                    .collect()
            })
            .collect())
    }
}

/// `POST {"query": q, "candidates": [...]}` returning `{"scores": [...]}`.
pub struct CrossEncoderScorer {
    pub endpoint: ServiceEndpoint,
}

#[derive(Deserialize)]
struct Scores {
    scores: Vec<f64>,
}

impl EvidenceScorer for CrossEncoderScorer {
    fn name(&self) -> &str {
        "cross_encoder"
    }

    fn score_batch(
        &self,
        queries: &[String],
        evidence: &[EvidenceSentence],
    ) -> Result<Vec<Vec<ScoredEvidence>>, ScoreError> {
        let candidates: Vec<&str> = evidence.iter().map(|e| e.text.as_str()).collect();
        queries
            .iter()
            .map(|q| {
                let Scores { scores } = self.endpoint.post(json!({ "query": q, "candidates": candidates }))?;
                if scores.len() != evidence.len() {
                    return Err(ScoreError::CountMismatch {
                        what: "scores",
                        expected: evidence.len(),
                        got: scores.len(),
                    });
                }
                Ok(scores
                    .into_iter()
                    .zip(evidence)
                    .map(|(s, e)| ScoredEvidence::new(s, e.index))
                    .collect())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use serde_json::Value;

    use super::*;
    use crate::http::{HttpReply, TransportError};

    struct Fake<F: Fn(&Value) -> String + Send + Sync>(F);

    impl<F: Fn(&Value) -> String + Send + Sync> Transport for Fake<F> {
        fn post_json(&self, _: &str, _: &[(String, String)], body: &Value) -> Result<HttpReply, TransportError> {
            Ok(HttpReply::ok((self.0)(body)))
        }
    }

    fn endpoint(t: impl Transport + 'static) -> ServiceEndpoint {
        ServiceEndpoint {
            url: "http://scorer".into(),
            transport: Arc::new(t),
            retry: RetryPolicy { max_attempts: 1, base_delay: Duration::ZERO, max_delay: Duration::ZERO },
        }
    }

    // one-hot vectors on the first letter
    fn embed(body: &Value) -> String {
        let vectors: Vec<Vec<f64>> = body["texts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| {
                let c = t.as_str().unwrap().chars().next().unwrap_or('a');
                let mut v = vec![0.0; 3];
                v[(c as usize) % 3] = 2.0;
                v
            })
            .collect();
        json!({ "vectors": vectors }).to_string()
    }

    #[test]
    fn embedding_dot_and_cosine() {
        let ev = EvidenceSentence::document(&["apple", "banana"]);
        let dot = EmbeddingScorer { endpoint: endpoint(Fake(embed)), similarity: Similarity::Dot };
        let out = dot.score_batch(&["avocado".into()], &ev).unwrap();
        assert_eq!(out[0][0].score, 4.0);
        assert_eq!(out[0][1].score, 0.0);
        let cos = EmbeddingScorer { endpoint: endpoint(Fake(embed)), similarity: Similarity::Cosine };
        assert_eq!(cos.score_batch(&["avocado".into()], &ev).unwrap()[0][0].score, 1.0);
    }

    #[test]
    fn embedding_count_mismatch() {
        let short = |_: &Value| json!({ "vectors": [[1.0]] }).to_string();
        let s = EmbeddingScorer { endpoint: endpoint(Fake(short)), similarity: Similarity::Dot };
        let err = s.score_batch(&["q".into()], &EvidenceSentence::document(&["a"])).unwrap_err();
        assert!(matches!(err, ScoreError::CountMismatch { expected: 2, got: 1, .. }));
    }

    #[test]
    fn cross_encoder_keeps_negative_scores() {
        let reply = |b: &Value| {
            let n = b["candidates"].as_array().unwrap().len();
            let scores: Vec<f64> = (0..n).map(|i| -0.043 + 0.022 * i as f64).collect();
            json!({ "scores": scores }).to_string()
        };
        let s = CrossEncoderScorer { endpoint: endpoint(Fake(reply)) };
        let out = s.score_batch(&["q".into()], &EvidenceSentence::document(&["a", "b"])).unwrap();
        assert!(out[0][1].score > out[0][0].score && out[0][0].score < 0.0);
    }

    #[test]
    fn cross_encoder_mismatch_and_malformed() {
        let s = CrossEncoderScorer { endpoint: endpoint(Fake(|_: &Value| r#"{"scores":[1.0]}"#.to_string())) };
        let ev = EvidenceSentence::document(&["a", "b"]);
        assert!(matches!(s.score_batch(&["q".into()], &ev), Err(ScoreError::CountMismatch { .. })));
        let s = CrossEncoderScorer { endpoint: endpoint(Fake(|_: &Value| "oops".to_string())) };
        assert!(matches!(s.score_batch(&["q".into()], &ev), Err(ScoreError::Malformed(_))));
    }
}

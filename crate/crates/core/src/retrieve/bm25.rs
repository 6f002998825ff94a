//! Okapi BM25 over the sentences of one document.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{EvidenceSentence, ScoredEvidence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn bm25_tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    doc_freq: HashMap<String, usize>,
    term_counts: Vec<HashMap<String, usize>>,
    lengths: Vec<usize>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn build(evidence: &[EvidenceSentence], params: Bm25Params) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut term_counts = Vec::with_capacity(evidence.len());
        let mut lengths = Vec::with_capacity(evidence.len());
        for e in evidence {
            let tokens = bm25_tokenize(&e.text);
            lengths.push(tokens.len());
            let mut counts: HashMap<String, usize> = HashMap::new();
            for t in tokens {
                *counts.entry(t).or_default() += 1;
            }
            for t in counts.keys() {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            term_counts.push(counts);
        }
        let avgdl = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
        };
        Self { params, doc_freq, term_counts, lengths, avgdl }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn length(&self, evidence: usize) -> usize {
        self.lengths[evidence]
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Score of one evidence position; repeated query tokens count repeatedly.
    pub fn score_tokens(&self, query: &[String], evidence: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let counts = &self.term_counts[evidence];
        let norm = if self.avgdl > 0.0 {
            self.lengths[evidence] as f64 / self.avgdl
        } else {
            0.0
        };
        query
            .iter()
            .map(|t| {
                let tf = counts.get(t).copied().unwrap_or(0) as f64;
                if tf == 0.0 {
                    return 0.0;
                }
                self.idf(t) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
            })
            .sum()
    }

    /// Scores every evidence position, in position order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let tokens = bm25_tokenize(query);
        (0..self.len()).map(|i| self.score_tokens(&tokens, i)).collect()
    }

    /// Scores paired with the indices of the evidence the index was built from.
    pub fn score_evidence(&self, query: &str, evidence: &[EvidenceSentence]) -> Vec<ScoredEvidence> {
        self.scores(query)
            .into_iter()
            .zip(evidence)
            .map(|(s, e)| ScoredEvidence::new(s, e.index))
            .collect()
    }
}

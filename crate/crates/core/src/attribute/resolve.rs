//! Mapping sentences quoted by a model back to candidate evidence.

use serde::{Deserialize, Serialize};

use crate::lenient;
use crate::model::{nfc, EvidenceSentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Normalized,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedEvidence {
    pub evidence_index: usize,
    pub match_kind: MatchKind,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Resolution {
    pub resolved: Vec<ResolvedEvidence>,
    /// Returned strings that matched no candidate.
    pub unresolved: usize,
    pub parse_error: Option<String>,
}

/// Lowercase, whitespace collapsed, trailing punctuation removed.
pub fn normalize_for_match(text: &str) -> String {
    let lower = nfc(text).to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

pub fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

/// Resolves one quoted sentence: exact text, then normalized text, then the
/// most similar normalized candidate at or above `threshold`. Earlier
/// candidates win ties.
pub fn resolve_one(quote: &str, candidates: &[EvidenceSentence], threshold: f64) -> Option<ResolvedEvidence> {
    let quote = nfc(quote.trim());
    if let Some(c) = candidates.iter().find(|c| c.text == quote) {
        return Some(ResolvedEvidence { evidence_index: c.index, match_kind: MatchKind::Exact, similarity: 1.0 });
    }
    let nq = normalize_for_match(&quote);
    let normalized: Vec<String> = candidates.iter().map(|c| normalize_for_match(&c.text)).collect();
    if let Some(pos) = normalized.iter().position(|n| *n == nq) {
        return Some(ResolvedEvidence {
            evidence_index: candidates[pos].index,
            match_kind: MatchKind::Normalized,
            similarity: 1.0,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (pos, n) in normalized.iter().enumerate() {
        let s = similarity(&nq, n);
        if s >= threshold && best.is_none_or(|(_, b)| s > b) {
            best = Some((pos, s));
        }
    }
    best.map(|(pos, s)| ResolvedEvidence {
        evidence_index: candidates[pos].index,
        match_kind: MatchKind::Fuzzy,
        similarity: s,
    })
}

/// Parses a list of quoted sentences and resolves each one, keeping the
/// first occurrence of every evidence and at most `max_returned` of them.
pub fn parse_and_resolve(
    raw: &str,
    candidates: &[EvidenceSentence],
    threshold: f64,
    max_returned: usize,
) -> Resolution {
    let quotes = match lenient::parse_string_list(raw) {
        Ok(q) => q,
        Err(e) => {
            return Resolution { parse_error: Some(e.to_string()), ..Resolution::default() };
        }
    };
    let mut out = Resolution::default();
    for q in &quotes {
        match resolve_one(q, candidates, threshold) {
            Some(r) if out.resolved.iter().all(|x| x.evidence_index != r.evidence_index) => out.resolved.push(r),
            Some(_) => {}
            None => out.unresolved += 1,
        }
    }
    out.resolved.truncate(max_returned);
    out
}

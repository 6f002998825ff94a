//! Rule-based detection of sentences that need no decomposition.
//!
//! A sentence is simple when it contains no punctuation besides full stops
//! and quotes, and its tags are all nouns, pronouns or articles, except for
//! at most one verb. Tags are counted as a multiset, so "Alex met Sam" has
//! two nominal tags and one verb.

use std::sync::Arc;

use super::tagger::{tag, PosClass, PosTagger, TagError, TaggedSentence};

/// Punctuation that does not disqualify a sentence. Curly quotes count as
/// quotes.
pub const ALLOWED_PUNCTUATION: [char; 7] = [
    '.', '"', '\'', '\u{201C}', '\u{201D}', '\u{2018}', '\u{2019}',
];

/// Applies the simple-sentence rule to an already tagged sentence.
pub fn is_simple(tagged: &TaggedSentence) -> bool {
    if tagged
        .punctuation
        .iter()
        .any(|c| !ALLOWED_PUNCTUATION.contains(c))
    {
        return false;
    }
    let mut verbs = 0usize;
    for t in &tagged.tags {
        match t.tag {
            PosClass::Verb => verbs += 1,
            PosClass::Other => return false,
            _ => {}
        }
    }
    verbs <= 1
}

/// Decides whether an answer sentence can skip decomposition.
pub trait SentenceClassifier: Send + Sync {
    fn name(&self) -> &str;
    fn is_simple(&self, sentence: &str) -> Result<bool, TagError>;
}

/// The POS-rule classifier over a pluggable tagger.
#[derive(Clone)]
pub struct PosRuleClassifier {
    tagger: Arc<dyn PosTagger>,
}

impl PosRuleClassifier {
    pub fn new(tagger: Arc<dyn PosTagger>) -> Self {
        Self { tagger }
    }

    pub fn tag(&self, sentence: &str) -> Result<TaggedSentence, TagError> {
        tag(sentence, self.tagger.as_ref())
    }
}

impl SentenceClassifier for PosRuleClassifier {
    fn name(&self) -> &str {
        "pos-rule"
    }

    fn is_simple(&self, sentence: &str) -> Result<bool, TagError> {
        Ok(is_simple(&self.tag(sentence)?))
    }
}

/// Sends every sentence to the decomposer.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverSimple;

impl SentenceClassifier for NeverSimple {
    fn name(&self) -> &str {
        "never"
    }

    fn is_simple(&self, _sentence: &str) -> Result<bool, TagError> {
        Ok(false)
    }
}

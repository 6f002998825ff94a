//! Sentence segmentation, part-of-speech tagging and the simple-sentence
//! classifier.

mod classifier;
mod lexicon;
mod segment;
mod tagger;

pub use classifier::{is_simple, NeverSimple, PosRuleClassifier, SentenceClassifier, ALLOWED_PUNCTUATION};
pub use segment::split_sentences;
pub use tagger::{tag, tokenize, LexiconTagger, PosClass, PosTag, PosTagger, TagError, TaggedSentence};

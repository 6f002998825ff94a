//! Part-of-speech tagging collapsed to the five classes the simple-sentence
//! rule needs.
//!
//! Finer tag sets are collapsed with a fixed mapping:
//!
//! | class     | Penn Treebank                    | Universal Dependencies |
//! |-----------|----------------------------------|------------------------|
//! | `Noun`    | NN NNS NNP NNPS                  | NOUN PROPN             |
//! | `Pronoun` | PRP PRP$ WP WP$                  | PRON                   |
//! | `Verb`    | VB VBD VBG VBN VBP VBZ MD        | VERB AUX               |
//! | `Article` | DT                               | DET                    |
//! | `Other`   | every other tag                  | every other tag        |

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PosClass {
    Noun,
    Pronoun,
    Verb,
    Article,
    Other,
}

impl PosClass {
    pub const ALL: [PosClass; 5] = [
        PosClass::Noun,
        PosClass::Pronoun,
        PosClass::Verb,
        PosClass::Article,
        PosClass::Other,
    ];

    /// Nouns, pronouns and articles.
    pub fn is_nominal(self) -> bool {
        matches!(self, PosClass::Noun | PosClass::Pronoun | PosClass::Article)
    }

    /// Maps a five-way, Penn Treebank or Universal Dependencies tag to its
    /// class. Returns `None` for tags outside those sets.
    pub fn from_known_tag(tag: &str) -> Option<PosClass> {
        let class = match tag {
            "NN" | "NNS" | "NNP" | "NNPS" | "NOUN" | "PROPN" => PosClass::Noun,
            "PRP" | "PRP$" | "WP" | "WP$" | "PRON" => PosClass::Pronoun,
            "VB" | "VBD" | "VBG" | "VBN" | "VBP" | "VBZ" | "MD" | "VERB" | "AUX" => PosClass::Verb,
            "DT" | "DET" => PosClass::Article,
            "CC" | "CD" | "EX" | "FW" | "IN" | "JJ" | "JJR" | "JJS" | "LS" | "PDT" | "POS"
            | "RB" | "RBR" | "RBS" | "RP" | "SYM" | "TO" | "UH" | "WDT" | "WRB" | "ADJ" | "ADP"
            | "ADV" | "CCONJ" | "INTJ" | "NUM" | "PART" | "PUNCT" | "SCONJ" | "X" => PosClass::Other,
            _ => match tag.to_ascii_lowercase().as_str() {
                "noun" => PosClass::Noun,
                "pronoun" => PosClass::Pronoun,
                "verb" => PosClass::Verb,
                "article" => PosClass::Article,
                "other" => PosClass::Other,
                _ => return None,
            },
        };
        Some(class)
    }

    /// Like [`PosClass::from_known_tag`], with unknown tags collapsing to
    /// `Other`.
    pub fn collapse(tag: &str) -> PosClass {
        Self::from_known_tag(tag).unwrap_or(PosClass::Other)
    }
}

impl fmt::Display for PosClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PosClass::Noun => "Noun",
            PosClass::Pronoun => "Pronoun",
            PosClass::Verb => "Verb",
            PosClass::Article => "Article",
            PosClass::Other => "Other",
        };
        f.write_str(s)
    }
}

impl FromStr for PosClass {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosClass::from_known_tag(s).ok_or_else(|| TagError::UnknownTag(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosTag {
    pub tag: PosClass,
    pub token: String,
}

/// A sentence with one tag per word token. Punctuation is kept out of the tag
/// list and recorded as a character set instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub text: String,
    pub tags: Vec<PosTag>,
    pub punctuation: BTreeSet<char>,
}

#[derive(Debug, Error)]
pub enum TagError {
    #[error("cannot tag an empty sentence")]
    EmptySentence,
    #[error("sentence {0:?} contains no word tokens")]
    NoTokens(String),
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("tagger backend failed: {0}")]
    Backend(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A tagging backend. Receives word tokens, returns one class per token.
pub trait PosTagger: Send + Sync {
    fn name(&self) -> &str;
    fn tag_tokens(&self, tokens: &[String]) -> Result<Vec<PosClass>, TagError>;
}

fn joins_word(c: char, prev: Option<char>, next: Option<char>) -> bool {
    let alnum = |o: Option<char>| o.is_some_and(char::is_alphanumeric);
    let digit = |o: Option<char>| o.is_some_and(|c| c.is_ascii_digit());
    match c {
        '-' | '\'' | '\u{2019}' | '.' => alnum(prev) && alnum(next),
        ',' => digit(prev) && digit(next),
        _ => false,
    }
}

/// Splits a sentence into word tokens and the set of punctuation characters
/// it contains. Hyphens, apostrophes and full stops between alphanumerics stay
/// inside the token ("oil-based", "you're", "e.g"); so do commas between
/// digits.
pub fn tokenize(text: &str) -> (Vec<String>, BTreeSet<char>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut punctuation = BTreeSet::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| chars[p]);
        let next = chars.get(i + 1).copied();
        if c.is_alphanumeric() || joins_word(c, prev, next) {
            current.push(c);
            continue;
        }
        if !c.is_whitespace() {
            punctuation.insert(c);
        }
        if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    (tokens, punctuation)
}

/// Tags a sentence with the given backend.
pub fn tag(sentence: &str, tagger: &dyn PosTagger) -> Result<TaggedSentence, TagError> {
    if sentence.trim().is_empty() {
        return Err(TagError::EmptySentence);
    }
    let (tokens, punctuation) = tokenize(sentence);
    if tokens.is_empty() {
        return Err(TagError::NoTokens(sentence.to_string()));
    }
    let classes = tagger.tag_tokens(&tokens)?;
    if classes.len() != tokens.len() {
        return Err(TagError::Backend(format!(
            "{} returned {} tags for {} tokens",
            tagger.name(),
            classes.len(),
            tokens.len()
        )));
    }
    let tags = tokens
        .into_iter()
        .zip(classes)
        .map(|(token, tag)| PosTag { tag, token })
        .collect();
    Ok(TaggedSentence {
        text: sentence.to_string(),
        tags,
        punctuation,
    })
}

/// Closed-class word lists plus suffix heuristics, defaulting to `Noun`.
///
/// Ambiguous words resolve to `Verb` or `Other` so that errors only ever make
/// a sentence look less simple.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    overrides: HashMap<String, PosClass>,
}

impl LexiconTagger {
    pub fn builtin() -> Self {
        Self::default()
    }

    /// Parses `token<TAB>tag` lines. Blank lines and lines starting with `#`
    /// are skipped. Tags may be five-way, Penn Treebank or UD names.
    pub fn from_lexicon_str(content: &str) -> Result<Self, TagError> {
        let mut overrides = HashMap::new();
        for (n, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, tag) = line.split_once('\t').ok_or_else(|| TagError::Lexicon {
                line: n + 1,
                message: "expected token<TAB>tag".into(),
            })?;
            let token = token.trim();
            if token.is_empty() {
                return Err(TagError::Lexicon {
                    line: n + 1,
                    message: "empty token".into(),
                });
            }
            let class = PosClass::from_known_tag(tag.trim()).ok_or_else(|| TagError::Lexicon {
                line: n + 1,
                message: format!("unknown tag {:?}", tag.trim()),
            })?;
            overrides.insert(token.to_lowercase(), class);
        }
        Ok(Self { overrides })
    }

    pub fn from_lexicon_file(path: &Path) -> Result<Self, TagError> {
        Self::from_lexicon_str(&std::fs::read_to_string(path)?)
    }

    pub fn classify(&self, token: &str) -> PosClass {
        let lower = token.to_lowercase();
        if let Some(&class) = self.overrides.get(&lower) {
            return class;
        }
        lexicon::classify_builtin(&lower)
    }
}

impl PosTagger for LexiconTagger {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn tag_tokens(&self, tokens: &[String]) -> Result<Vec<PosClass>, TagError> {
        Ok(tokens.iter().map(|t| self.classify(t)).collect())
    }
}

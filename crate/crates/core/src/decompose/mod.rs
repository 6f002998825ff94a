//! Answer decomposition into information units.

mod parse;
mod prompts;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_decomposition, parse_fact_list, ParsedDecomposition};
pub use prompts::{
    builtin_examples, cog_prompt, factscore_examples, factscore_prompt, FewShotExample, Instruction,
    BAD_INSTRUCTIONS, COG_TASK, FACTSCORE_TASK, GOOD_INSTRUCTIONS,
};

use crate::gateway::{ChatSettings, GatewayError, LlmGateway};
use crate::model::{AnswerPart, InformationUnit, TaskRecord, UnitOrigin};
use crate::text::SentenceClassifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Nil,
    Factscore,
    Cog,
    CogNoNeg,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [StrategyKind::Nil, StrategyKind::Factscore, StrategyKind::Cog, StrategyKind::CogNoNeg];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Nil => "nil",
            StrategyKind::Factscore => "factscore",
            StrategyKind::Cog => "cog",
            StrategyKind::CogNoNeg => "cog_no_neg",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown decomposition strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartParseError {
    pub part_index: Option<usize>,
    pub message: String,
}

/// Units per answer part for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub record_id: String,
    pub strategy: StrategyKind,
    pub per_sentence_units: BTreeMap<usize, Vec<InformationUnit>>,
    /// Facts that cited a sentence outside the answer.
    pub drops: usize,
    pub parse_errors: Vec<PartParseError>,
    /// Parts the classifier sent around the model.
    #[serde(default)]
    pub bypassed: Vec<usize>,
    #[serde(default)]
    pub raw_responses: Vec<String>,
}

impl DecompositionResult {
    fn new(record: &TaskRecord, strategy: StrategyKind) -> Self {
        Self {
            record_id: record.id.clone(),
            strategy,
            per_sentence_units: BTreeMap::new(),
            drops: 0,
            parse_errors: Vec::new(),
            bypassed: Vec::new(),
            raw_responses: Vec::new(),
        }
    }

    fn passthrough(&mut self, part: &AnswerPart) {
        self.per_sentence_units.insert(part.index, vec![InformationUnit::passthrough(part)]);
    }

    fn decomposed(&mut self, part: usize, facts: &[String]) {
        let units = facts.iter().map(|f| InformationUnit::decomposed(f, part)).collect();
        self.per_sentence_units.insert(part, units);
    }

    pub fn units_for(&self, part: usize) -> &[InformationUnit] {
        self.per_sentence_units.get(&part).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_units(&self) -> usize {
        self.per_sentence_units.values().map(Vec::len).sum()
    }

    /// Mean unit count over the answer parts.
    pub fn mean_units_per_sentence(&self) -> Option<f64> {
        let n = self.per_sentence_units.len();
        (n > 0).then(|| self.total_units() as f64 / n as f64)
    }

    /// Checks the result against the record it came from.
    pub fn check(&self, record: &TaskRecord) -> Result<(), String> {
        for (&key, units) in &self.per_sentence_units {
            let part = record.answer_parts.get(key).ok_or_else(|| format!("part {key} not in record"))?;
            for u in units {
                if u.source_part_index != key {
                    return Err(format!("unit under part {key} claims part {}", u.source_part_index));
                }
                if u.origin == UnitOrigin::Passthrough && u.text != part.text {
                    return Err(format!("passthrough unit for part {key} differs from the sentence"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("record {record_id}, part {part:?}: {source}")]
    Gateway {
        record_id: String,
        part: Option<usize>,
        #[source]
        source: GatewayError,
    },
    #[error("strategy {0} needs a language model gateway")]
    NoGateway(StrategyKind),
    #[error("invalid strategy setup: {0}")]
    InvalidStrategy(String),
}

pub trait Decomposer: Send + Sync {
    fn kind(&self) -> StrategyKind;

    fn decompose(&self, record: &TaskRecord) -> Result<DecompositionResult, DecomposeError>;
}

/// Every answer sentence is its own unit.
#[derive(Debug, Clone, Copy, Default)]
pub struct NilDecomposer;

impl Decomposer for NilDecomposer {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Nil
    }

    fn decompose(&self, record: &TaskRecord) -> Result<DecompositionResult, DecomposeError> {
        let mut result = DecompositionResult::new(record, StrategyKind::Nil);
        for part in &record.answer_parts {
            result.passthrough(part);
        }
        Ok(result)
    }
}

/// What the model-backed decomposers share.
#[derive(Clone)]
pub struct LlmContext {
    pub gateway: Arc<LlmGateway>,
    pub chat: ChatSettings,
    pub classifier: Arc<dyn SentenceClassifier>,
}

impl LlmContext {
    /// Splits parts into those the classifier bypasses and the rest.
    fn triage<'a>(&self, record: &'a TaskRecord, result: &mut DecompositionResult) -> Vec<&'a AnswerPart> {
        let mut pending = Vec::new();
        for part in &record.answer_parts {
            match self.classifier.is_simple(&part.text) {
                Ok(true) => {
                    result.passthrough(part);
                    result.bypassed.push(part.index);
                }
                Ok(false) => pending.push(part),
                Err(e) => {
                    log::debug!("record {} part {}: not classified ({e})", record.id, part.index);
                    pending.push(part);
                }
            }
        }
        pending
    }

    fn ask(&self, record: &TaskRecord, part: Option<usize>, prompt: String) -> Result<String, DecomposeError> {
        let gateway_err = |source| DecomposeError::Gateway { record_id: record.id.clone(), part, source };
        let request = self.chat.user_request(prompt).map_err(gateway_err)?;
        Ok(self.gateway.complete(&request).map_err(gateway_err)?.content)
    }
}

/// One model call per sentence, asking for an exhaustive split.
pub struct FactScoreDecomposer {
    pub ctx: LlmContext,
}

impl Decomposer for FactScoreDecomposer {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Factscore
    }

    fn decompose(&self, record: &TaskRecord) -> Result<DecompositionResult, DecomposeError> {
        let mut result = DecompositionResult::new(record, StrategyKind::Factscore);
        let pending = self.ctx.triage(record, &mut result);
        let replies: Vec<(&AnswerPart, String)> = pending
            .par_iter()
            .map(|part| Ok((*part, self.ctx.ask(record, Some(part.index), factscore_prompt(part))?)))
            .collect::<Result<_, DecomposeError>>()?;
        for (part, raw) in replies {
            match parse_fact_list(&raw) {
                Ok(facts) => result.decomposed(part.index, &facts),
                Err(e) => {
                    result.parse_errors.push(PartParseError { part_index: Some(part.index), message: e.to_string() });
                    result.passthrough(part);
                }
            }
            result.raw_responses.push(raw);
        }
        Ok(result)
    }
}

/// One model call per answer with the instruction schema and examples.
pub struct CogDecomposer {
    pub ctx: LlmContext,
    pub examples: Vec<FewShotExample>,
    pub negatives: bool,
}

impl CogDecomposer {
    pub fn new(ctx: LlmContext, examples: Vec<FewShotExample>, negatives: bool) -> Result<Self, DecomposeError> {
        if examples.is_empty() {
            return Err(DecomposeError::InvalidStrategy("at least one few-shot example is required".into()));
        }
        if negatives && !examples.iter().any(FewShotExample::has_bad_units) {
            return Err(DecomposeError::InvalidStrategy("an example with bad units is required".into()));
        }
        Ok(Self { ctx, examples, negatives })
    }
}

impl Decomposer for CogDecomposer {
    fn kind(&self) -> StrategyKind {
        if self.negatives {
            StrategyKind::Cog
        } else {
            StrategyKind::CogNoNeg
        }
    }

    fn decompose(&self, record: &TaskRecord) -> Result<DecompositionResult, DecomposeError> {
        let mut result = DecompositionResult::new(record, self.kind());
        let pending = self.ctx.triage(record, &mut result);
        if pending.is_empty() {
            return Ok(result);
        }
        let prompt = cog_prompt(&record.question, &record.answer_parts, &self.examples, self.negatives);
        let raw = self.ctx.ask(record, None, prompt)?;
        match parse_decomposition(&raw, record.answer_parts.len()) {
            Ok(parsed) => {
                result.drops = parsed.dropped;
                for part in pending {
                    let facts = parsed.units.get(&part.index).cloned().unwrap_or_default();
                    result.decomposed(part.index, &facts);
                }
            }
            Err(e) => {
                result.parse_errors.push(PartParseError { part_index: None, message: e.to_string() });
                for part in pending {
                    result.passthrough(part);
                }
            }
        }
        result.raw_responses.push(raw);
        Ok(result)
    }
}

//! Decomposers and attributors registered by name and built from settings.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::attribute::{Attributor, LlmAttributor, LlmAttributorConfig, RetrievalAttributor};
use crate::decompose::{builtin_examples, CogDecomposer, Decomposer, FactScoreDecomposer, LlmContext, NilDecomposer};
use crate::gateway::{ChatSettings, LlmGateway};
use crate::http::{RetryPolicy, Transport};
use crate::retrieve::{Bm25Params, Bm25Scorer, CrossEncoderScorer, EmbeddingScorer, ServiceEndpoint, Similarity};
use crate::text::SentenceClassifier;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("unknown {kind} `{name}`; known: {}", .known.join(", "))]
    Unknown { kind: &'static str, name: String, known: Vec<String> },
    #[error("`{0}` needs a model gateway")]
    NoGateway(String),
    #[error("`{name}` needs {what}")]
    Missing { name: String, what: &'static str },
    #[error("{0}")]
    Invalid(String),
}

/// Everything a factory may draw on.
#[derive(Clone)]
pub struct BuildContext {
    pub gateway: Option<Arc<LlmGateway>>,
    pub chat: ChatSettings,
    pub classifier: Arc<dyn SentenceClassifier>,
    /// Number of built-in few-shot examples in decomposition prompts.
    pub few_shot: usize,
    pub llm_attributor: LlmAttributorConfig,
    pub bm25: Bm25Params,
    pub embedding_url: Option<String>,
    pub cross_encoder_url: Option<String>,
    pub similarity: Similarity,
    pub service_transport: Arc<dyn Transport>,
    pub retry: RetryPolicy,
}

impl BuildContext {
    fn llm(&self, name: &str) -> Result<LlmContext, RegistryError> {
        let gateway = self.gateway.clone().ok_or_else(|| RegistryError::NoGateway(name.into()))?;
        Ok(LlmContext { gateway, chat: self.chat.clone(), classifier: self.classifier.clone() })
    }

    fn examples(&self) -> Result<Vec<crate::decompose::FewShotExample>, RegistryError> {
        let all = builtin_examples();
        if self.few_shot == 0 || self.few_shot > all.len() {
            return Err(RegistryError::Invalid(format!("few-shot count must be between 1 and {}", all.len())));
        }
        Ok(all.into_iter().take(self.few_shot).collect())
    }

    fn endpoint(&self, name: &str, url: &Option<String>) -> Result<ServiceEndpoint, RegistryError> {
        let url = url.clone().ok_or(RegistryError::Missing { name: name.into(), what: "a service url" })?;
        Ok(ServiceEndpoint { url, transport: self.service_transport.clone(), retry: self.retry })
    }
}

pub type DecomposerFactory = fn(&BuildContext) -> Result<Arc<dyn Decomposer>, RegistryError>;
pub type AttributorFactory = fn(&BuildContext) -> Result<Arc<dyn Attributor>, RegistryError>;

fn cog(ctx: &BuildContext, name: &str, negatives: bool) -> Result<Arc<dyn Decomposer>, RegistryError> {
    let d = CogDecomposer::new(ctx.llm(name)?, ctx.examples()?, negatives).map_err(|e| RegistryError::Invalid(e.to_string()))?;
    Ok(Arc::new(d))
}

#[derive(Clone)]
pub struct Registry {
    decomposers: BTreeMap<String, DecomposerFactory>,
    attributors: BTreeMap<String, AttributorFactory>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { decomposers: BTreeMap::new(), attributors: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register_decomposer("nil", |_| Ok(Arc::new(NilDecomposer)));
        r.register_decomposer("factscore", |c| Ok(Arc::new(FactScoreDecomposer { ctx: c.llm("factscore")? })));
        r.register_decomposer("cog", |c| cog(c, "cog", true));
        r.register_decomposer("cog_no_neg", |c| cog(c, "cog_no_neg", false));
        r.register_attributor("bm25", |c| Ok(Arc::new(RetrievalAttributor { scorer: Arc::new(Bm25Scorer { params: c.bm25 }) })));
        r.register_attributor("embedding", |c| {
            let endpoint = c.endpoint("embedding", &c.embedding_url)?;
            Ok(Arc::new(RetrievalAttributor { scorer: Arc::new(EmbeddingScorer { endpoint, similarity: c.similarity }) }))
        });
        r.register_attributor("cross_encoder", |c| {
            let endpoint = c.endpoint("cross_encoder", &c.cross_encoder_url)?;
            Ok(Arc::new(RetrievalAttributor { scorer: Arc::new(CrossEncoderScorer { endpoint }) }))
        });
        r.register_attributor("llm", |c| {
            c.llm_attributor.validate().map_err(RegistryError::Invalid)?;
            let gateway = c.gateway.clone().ok_or_else(|| RegistryError::NoGateway("llm".into()))?;
            Ok(Arc::new(LlmAttributor { gateway, chat: c.chat.clone(), config: c.llm_attributor }))
        });
        r
    }

    pub fn register_decomposer(&mut self, name: &str, factory: DecomposerFactory) {
        self.decomposers.insert(name.to_string(), factory);
    }

    pub fn register_attributor(&mut self, name: &str, factory: AttributorFactory) {
        self.attributors.insert(name.to_string(), factory);
    }

    pub fn decomposer_names(&self) -> Vec<String> {
        self.decomposers.keys().cloned().collect()
    }

    pub fn attributor_names(&self) -> Vec<String> {
        self.attributors.keys().cloned().collect()
    }

    pub fn decomposer(&self, name: &str, ctx: &BuildContext) -> Result<Arc<dyn Decomposer>, RegistryError> {
        let f = self.decomposers.get(name).ok_or_else(|| RegistryError::Unknown {
            kind: "decomposer",
            name: name.into(),
            known: self.decomposer_names(),
        })?;
        f(ctx)
    }

    pub fn attributor(&self, name: &str, ctx: &BuildContext) -> Result<Arc<dyn Attributor>, RegistryError> {
        let f = self.attributors.get(name).ok_or_else(|| RegistryError::Unknown {
            kind: "attributor",
            name: name.into(),
            known: self.attributor_names(),
        })?;
        f(ctx)
    }
}

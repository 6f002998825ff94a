//! Pipeline configuration: a TOML file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};

use attrib_core::attribute::LlmAttributorConfig;
use attrib_core::datasets::SourceFormat;
use attrib_core::eval::Averaging;
use attrib_core::gateway::GatewayMode;
use attrib_core::retrieve::Bm25Params;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub format: SourceFormat,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub sources: Vec<SourceSpec>,
    /// Skip exact-match exclusion.
    pub keep_copied_answers: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { sources: Vec::new(), keep_copied_answers: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposerConfig {
    pub strategy: String,
    pub few_shot: usize,
    /// `pos_rule` or `never`.
    pub classifier: String,
    /// Tagger lexicon replacing the built-in one.
    pub lexicon: Option<PathBuf>,
}

impl Default for DecomposerConfig {
    fn default() -> Self {
        Self { strategy: "nil".into(), few_shot: 1, classifier: "pos_rule".into(), lexicon: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieverConfig {
    pub k1: f64,
    pub b: f64,
    pub embedding_url: Option<String>,
    pub cross_encoder_url: Option<String>,
    /// `dot` or `cosine`.
    pub similarity: String,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        let p = Bm25Params::default();
        Self { k1: p.k1, b: p.b, embedding_url: None, cross_encoder_url: None, similarity: "dot".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributorSection {
    pub kind: String,
}

impl Default for AttributorSection {
    fn default() -> Self {
        Self { kind: "bm25".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub model: String,
    pub temperature: f64,
    pub endpoint: String,
    pub api_key_env: Option<String>,
    /// Total attempts per request.
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub content_pointer: String,
    pub candidate_pool_size: usize,
    pub max_returned_per_call: usize,
    pub fuzzy_threshold: f64,
    pub per_unit_calls: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        let a = LlmAttributorConfig::default();
        Self {
            model: "gpt-4".into(),
            temperature: 0.0,
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            api_key_env: Some("ATTRIB_API_KEY".into()),
            max_retries: 4,
            max_in_flight: 4,
            content_pointer: "/choices/0/message/content".into(),
            candidate_pool_size: a.candidate_pool_size,
            max_returned_per_call: a.max_returned_per_call,
            fuzzy_threshold: a.fuzzy_threshold,
            per_unit_calls: a.per_unit_calls,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub mode: GatewayMode,
    pub dir: Option<PathBuf>,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self { mode: GatewayMode::Replay, dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub k: Vec<usize>,
    pub averaging: Averaging,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { k: vec![1, 2, 4], averaging: Averaging::Macro }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub decomposer: DecomposerConfig,
    pub retriever: RetrieverConfig,
    pub attributor: AttributorSection,
    pub llm: LlmConfig,
    pub cache: CacheConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            seed: 0,
            dataset: DatasetConfig::default(),
            decomposer: DecomposerConfig::default(),
            retriever: RetrieverConfig::default(),
            attributor: AttributorSection::default(),
            llm: LlmConfig::default(),
            cache: CacheConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a plain string.
fn override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key parsed"),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

/// Applies `a.b.c=value` to a TOML tree, creating tables as needed.
pub fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let mut table = tree;
    for segment in &path[..path.len() - 1] {
        let entry = table.entry(segment.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{segment}` in `{key}` is not a table")))?;
    }
    table.insert(path[path.len() - 1].to_string(), override_value(value.trim()));
    Ok(())
}

impl PipelineConfig {
    /// Reads the file (if any), applies overrides and resolves relative
    /// paths against the file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut tree = match path {
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                raw.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut cfg: PipelineConfig =
            toml::Value::Table(tree).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(base) = path.and_then(Path::parent) {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for s in &mut self.dataset.sources {
            fix(&mut s.path);
        }
        if let Some(p) = &mut self.decomposer.lexicon {
            fix(p);
        }
        if let Some(p) = &mut self.cache.dir {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.evaluation.k.is_empty() || self.evaluation.k.contains(&0) {
            return bad("evaluation.k must list positive cut-offs".into());
        }
        if self.llm.max_retries == 0 {
            return bad("llm.max_retries must be at least 1".into());
        }
        if !["pos_rule", "never"].contains(&self.decomposer.classifier.as_str()) {
            return bad(format!("decomposer.classifier `{}` is not pos_rule or never", self.decomposer.classifier));
        }
        if !["dot", "cosine"].contains(&self.retriever.similarity.as_str()) {
            return bad(format!("retriever.similarity `{}` is not dot or cosine", self.retriever.similarity));
        }
        self.attributor_config().validate().map_err(CliError::Config)?;
        Ok(())
    }

    /// Checks that every input path exists.
    pub fn check_inputs(&self) -> Result<(), CliError> {
        if self.dataset.sources.is_empty() {
            return Err(CliError::Config("dataset.sources is empty".into()));
        }
        let mut paths: Vec<&Path> = self.dataset.sources.iter().map(|s| s.path.as_path()).collect();
        paths.extend(self.decomposer.lexicon.as_deref());
        for p in paths {
            if !p.exists() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn bm25(&self) -> Bm25Params {
        Bm25Params { k1: self.retriever.k1, b: self.retriever.b }
    }

    pub fn attributor_config(&self) -> LlmAttributorConfig {
        LlmAttributorConfig {
            candidate_pool_size: self.llm.candidate_pool_size,
            max_returned_per_call: self.llm.max_returned_per_call,
            fuzzy_threshold: self.llm.fuzzy_threshold,
            per_unit_calls: self.llm.per_unit_calls,
            bm25: self.bm25(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load_without_file() {
        let c = PipelineConfig::load(None, &[]).unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.cache.mode, GatewayMode::Replay);
    }

    #[test]
    fn overrides_are_typed() {
        let c = PipelineConfig::load(
            None,
            &["decomposer.strategy=cog".into(), "evaluation.k=[1, 3]".into(), "llm.temperature=0.5".into(), "cache.mode=live".into()],
        )
        .unwrap();
        assert_eq!(c.decomposer.strategy, "cog");
        assert_eq!(c.evaluation.k, vec![1, 3]);
        assert_eq!(c.llm.temperature, 0.5);
        assert_eq!(c.cache.mode, GatewayMode::Live);
    }

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "output_dir = \"o\"\n[[dataset.sources]]\nformat = \"jsonl\"\npath = \"r.jsonl\"\n").unwrap();
        let c = PipelineConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(c.output_dir, dir.path().join("o"));
        assert_eq!(c.dataset.sources[0].path, dir.path().join("r.jsonl"));
        assert!(matches!(c.check_inputs(), Err(CliError::Config(_))));
    }

    #[test]
    fn bad_values_are_config_errors() {
        for o in ["evaluation.k=[]", "llm.max_retries=0", "nope.x=1", "decomposer.classifier=spacy", "llm.fuzzy_threshold=2.0", "novalue"] {
            assert!(matches!(PipelineConfig::load(None, &[o.into()]), Err(CliError::Config(_))), "{o}");
        }
    }
}

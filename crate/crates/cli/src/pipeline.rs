//! Stage functions and the end-to-end run.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use attrib_core::attribute::KeyAttribution;
use attrib_core::datasets::{self, apply_exclusions, IngestionStats};
use attrib_core::decompose::DecompositionResult;
use attrib_core::eval::{self, ablation_counters, canonical_json, EvalMode, EvalOptions, MetricsReport};
use attrib_core::gateway::{ChatSettings, GatewayConfig, GatewayMode, LlmGateway};
use attrib_core::http::{OfflineTransport, ReqwestTransport, RetryPolicy, Transport};
use attrib_core::registry::{BuildContext, Registry};
use attrib_core::retrieve::Similarity;
use attrib_core::text::{LexiconTagger, NeverSimple, PosRuleClassifier, SentenceClassifier};
use attrib_core::TaskRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const INGEST_STATS_FILE: &str = "ingest_stats.json";
pub const DECOMPOSITIONS_FILE: &str = "decompositions.jsonl";
pub const ATTRIBUTIONS_FILE: &str = "attributions.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

pub fn classifier(cfg: &PipelineConfig) -> Result<Arc<dyn SentenceClassifier>, CliError> {
    Ok(match cfg.decomposer.classifier.as_str() {
        "never" => Arc::new(NeverSimple),
        _ => {
            let tagger = match &cfg.decomposer.lexicon {
                Some(p) => LexiconTagger::from_lexicon_file(p).map_err(|e| CliError::Config(e.to_string()))?,
                None => LexiconTagger::builtin(),
            };
            Arc::new(PosRuleClassifier::new(Arc::new(tagger)))
        }
    })
}

fn retry(cfg: &PipelineConfig) -> RetryPolicy {
    RetryPolicy { max_attempts: cfg.llm.max_retries, ..RetryPolicy::default() }
}

/// Built components for one configuration.
pub struct Engine {
    pub registry: Registry,
    pub ctx: BuildContext,
}

impl Engine {
    /// `transport` replaces the HTTP client for the model gateway; replay
    /// mode never needs one.
    pub fn new(cfg: &PipelineConfig, transport: Option<Arc<dyn Transport>>) -> Result<Self, CliError> {
        let http = || -> Result<Arc<dyn Transport>, CliError> {
            Ok(Arc::new(ReqwestTransport::new(Duration::from_secs(120)).map_err(|e| CliError::Config(e.0))?))
        };
        let gateway = if cfg.cache.dir.is_some() || cfg.cache.mode == GatewayMode::Live {
            let transport = match (transport, cfg.cache.mode) {
                (Some(t), _) => t,
                (None, GatewayMode::Replay) => Arc::new(OfflineTransport),
                (None, _) => http()?,
            };
            let gc = GatewayConfig {
                endpoint: cfg.llm.endpoint.clone(),
                mode: cfg.cache.mode,
                cache_dir: cfg.cache.dir.clone(),
                max_in_flight: cfg.llm.max_in_flight.max(1),
                retry: retry(cfg),
                api_key_env: cfg.llm.api_key_env.clone(),
                content_pointer: cfg.llm.content_pointer.clone(),
            };
            Some(Arc::new(LlmGateway::new(gc, transport)?))
        } else {
            None
        };
        let needs_services = cfg.retriever.embedding_url.is_some() || cfg.retriever.cross_encoder_url.is_some();
        let service_transport: Arc<dyn Transport> = if needs_services { http()? } else { Arc::new(OfflineTransport) };
        let ctx = BuildContext {
            gateway,
            chat: ChatSettings { model: cfg.llm.model.clone(), temperature: cfg.llm.temperature },
            classifier: classifier(cfg)?,
            few_shot: cfg.decomposer.few_shot,
            llm_attributor: cfg.attributor_config(),
            bm25: cfg.bm25(),
            embedding_url: cfg.retriever.embedding_url.clone(),
            cross_encoder_url: cfg.retriever.cross_encoder_url.clone(),
            similarity: if cfg.retriever.similarity == "cosine" { Similarity::Cosine } else { Similarity::Dot },
            service_transport,
            retry: retry(cfg),
        };
        Ok(Self { registry: Registry::builtin(), ctx })
    }

    pub fn network_calls(&self) -> usize {
        self.ctx.gateway.as_ref().map_or(0, |g| g.network_calls())
    }
}

/// Loads every source, then applies exclusion unless disabled.
pub fn ingest(cfg: &PipelineConfig) -> Result<(Vec<TaskRecord>, IngestionStats), CliError> {
    let mut records = Vec::new();
    let mut stats: Option<IngestionStats> = None;
    for s in &cfg.dataset.sources {
        let (r, st) = datasets::load(s.format, &s.path)?;
        records.extend(r);
        stats = Some(match stats {
            None => st,
            Some(acc) => merge(acc, st),
        });
    }
    let mut seen = HashSet::new();
    let dups: Vec<&str> = records.iter().filter(|r| !seen.insert(r.id.as_str())).map(|r| r.id.as_str()).collect();
    if !dups.is_empty() {
        return Err(CliError::Data(format!("duplicate record ids: {}", dups.join(", "))));
    }
    let stats = stats.unwrap_or_default();
    if cfg.dataset.keep_copied_answers {
        return Ok((records, stats));
    }
    let (records, excluded) = apply_exclusions(records);
    Ok((records, stats.then(excluded)))
}

/// Side-by-side totals of two independent loads.
fn merge(a: IngestionStats, b: IngestionStats) -> IngestionStats {
    IngestionStats {
        records_in: a.records_in + b.records_in,
        records_out: a.records_out + b.records_out,
        excluded_exact_match: a.excluded_exact_match + b.excluded_exact_match,
        dropped_invalid: a.dropped_invalid + b.dropped_invalid,
        excluded_parts: a.excluded_parts + b.excluded_parts,
        skipped_unanswerable: a.skipped_unanswerable + b.skipped_unanswerable,
        skipped_yes_no: a.skipped_yes_no + b.skipped_yes_no,
        unresolved_gold: a.unresolved_gold + b.unresolved_gold,
        drop_reasons: [a.drop_reasons, b.drop_reasons].concat(),
    }
}

pub fn decompose(engine: &Engine, strategy: &str, records: &[TaskRecord]) -> Result<Vec<DecompositionResult>, CliError> {
    let d = engine.registry.decomposer(strategy, &engine.ctx)?;
    records
        .iter()
        .map(|r| {
            let out = d.decompose(r)?;
            out.check(r).map_err(|m| CliError::Data(format!("record {}: {m}", r.id)))?;
            Ok(out)
        })
        .collect()
}

/// Pairs decompositions with records by id.
pub fn pair<'a>(
    records: &'a [TaskRecord],
    decompositions: &'a [DecompositionResult],
) -> Result<Vec<(&'a TaskRecord, &'a DecompositionResult)>, CliError> {
    let by_id: HashMap<&str, &DecompositionResult> = decompositions.iter().map(|d| (d.record_id.as_str(), d)).collect();
    let known: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let mut missing: Vec<&str> = records.iter().map(|r| r.id.as_str()).filter(|id| !by_id.contains_key(id)).collect();
    missing.extend(decompositions.iter().map(|d| d.record_id.as_str()).filter(|id| !known.contains(id)));
    if !missing.is_empty() || by_id.len() != decompositions.len() {
        missing.sort_unstable();
        missing.dedup();
        return Err(CliError::Data(format!("records and decompositions do not match: {}", missing.join(", "))));
    }
    Ok(records.iter().map(|r| (r, by_id[r.id.as_str()])).collect())
}

pub fn attribute(
    engine: &Engine,
    kind: &str,
    records: &[TaskRecord],
    decompositions: &[DecompositionResult],
) -> Result<Vec<KeyAttribution>, CliError> {
    let a = engine.registry.attributor(kind, &engine.ctx)?;
    let mut out = Vec::new();
    for (r, d) in pair(records, decompositions)? {
        out.extend(a.attribute(r, d)?);
    }
    Ok(out)
}

pub fn mode_for(attributor: &str) -> EvalMode {
    if attributor == "llm" {
        EvalMode::Llm
    } else {
        EvalMode::Retrieval
    }
}

pub fn evaluate(
    cfg: &PipelineConfig,
    records: &[TaskRecord],
    decompositions: Option<&[DecompositionResult]>,
    attributions: &[KeyAttribution],
    mode: EvalMode,
) -> Result<MetricsReport, CliError> {
    let options = EvalOptions { mode, ks: cfg.evaluation.k.clone(), averaging: cfg.evaluation.averaging };
    let mut report = eval::evaluate(records, attributions, &options)?;
    let cls = classifier(cfg)?;
    report.ablation = Some(ablation_counters(records, decompositions.unwrap_or(&[]), attributions, Some(cls.as_ref())));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOutput {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: serde_json::Value,
    /// Input path to content hash.
    pub inputs: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageOutput>,
    pub network_calls: usize,
    pub complete: bool,
    pub error: Option<String>,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    datasets::jsonl::write_lines(path, content.lines().map(str::to_string)).map_err(CliError::from)
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run<'_> {
    fn record(&mut self, stage: &str, file: &str) -> Result<(), CliError> {
        let sha256 = hash_file(&self.dir.join(file))?;
        self.manifest.stages.insert(stage.into(), StageOutput { file: file.into(), sha256 });
        Ok(())
    }

    fn stages(&mut self, engine: &Engine) -> Result<(), CliError> {
        let cfg = self.cfg;
        let (records, stats) = ingest(cfg)?;
        datasets::write_records(&self.dir.join(RECORDS_FILE), &records)?;
        write_file(&self.dir.join(INGEST_STATS_FILE), &canonical_json(&stats))?;
        self.record("ingest", RECORDS_FILE)?;
        log::info!("ingested {} records", records.len());

        let decompositions = decompose(engine, &cfg.decomposer.strategy, &records)?;
        datasets::write_jsonl(&self.dir.join(DECOMPOSITIONS_FILE), &decompositions)?;
        self.record("decompose", DECOMPOSITIONS_FILE)?;

        let attributions = attribute(engine, &cfg.attributor.kind, &records, &decompositions)?;
        datasets::write_jsonl(&self.dir.join(ATTRIBUTIONS_FILE), &attributions)?;
        self.record("attribute", ATTRIBUTIONS_FILE)?;

        let report = evaluate(cfg, &records, Some(&decompositions), &attributions, mode_for(&cfg.attributor.kind))?;
        write_file(&self.dir.join(METRICS_FILE), &canonical_json(&report))?;
        self.record("evaluate", METRICS_FILE)?;
        Ok(())
    }
}

/// Runs every stage. The manifest is written last, marked incomplete when a
/// stage failed; earlier stage outputs stay on disk.
pub fn run_pipeline(cfg: &PipelineConfig, transport: Option<Arc<dyn Transport>>) -> Result<RunManifest, CliError> {
    cfg.check_inputs()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut inputs = BTreeMap::new();
    for s in &cfg.dataset.sources {
        inputs.insert(s.path.display().to_string(), hash_file(&s.path)?);
    }
    if let Some(p) = &cfg.decomposer.lexicon {
        inputs.insert(p.display().to_string(), hash_file(p)?);
    }
    let mut run = Run {
        cfg,
        dir: dir.clone(),
        manifest: RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: serde_json::to_value(cfg).expect("config serializes"),
            inputs,
            stages: BTreeMap::new(),
            network_calls: 0,
            complete: false,
            error: None,
            started_at_unix: now(),
            finished_at_unix: 0,
        },
    };
    let engine = Engine::new(cfg, transport)?;
    let result = run.stages(&engine);
    run.manifest.network_calls = engine.network_calls();
    run.manifest.complete = result.is_ok();
    run.manifest.error = result.as_ref().err().map(ToString::to_string);
    run.manifest.finished_at_unix = now();
    let text = serde_json::to_string_pretty(&run.manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST_FILE), &text)?;
    result.map(|_| run.manifest)
}

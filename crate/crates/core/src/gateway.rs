//! Chat-completion client with a record/replay cache.

use std::fmt;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::http::{HttpError, RetryPolicy, Semaphore, Transport};

pub const DEFAULT_CONTENT_POINTER: &str = "/choices/0/message/content";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    model: String,
    messages: Vec<ChatMessage>,
    temperature: f64,
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        messages: Vec<ChatMessage>,
        temperature: f64,
    ) -> Result<Self, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be a finite value >= 0, got {temperature}"
            )));
        }
        Ok(Self {
            model: model.into(),
            messages,
            temperature,
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// The request body sent over the wire.
    pub fn wire_body(&self) -> Value {
        json!({
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
        })
    }

    /// Hex SHA-256 of the compact JSON `{"model","messages","temperature"}`,
    /// fields in that order.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Model and sampling settings shared by every pipeline call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSettings {
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
}

impl ChatSettings {
    pub fn new(model: impl Into<String>) -> Self {
        Self { model: model.into(), temperature: 0.0 }
    }

    pub fn user_request(&self, prompt: impl Into<String>) -> Result<ChatRequest, GatewayError> {
        ChatRequest::new(self.model.clone(), vec![ChatMessage::user(prompt)], self.temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    pub cached: bool,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Record => "record",
            GatewayMode::Replay => "replay",
        })
    }
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            other => Err(format!("unknown llm mode {other:?} (live, record, replay)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("no cached response for request {fingerprint} in replay mode")]
    CacheMiss { fingerprint: String },
    #[error("cache entry {path}: {message}")]
    CorruptCacheEntry { path: PathBuf, message: String },
    #[error("cache i/o at {path}: {source}")]
    CacheIo { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Http(#[from] HttpError),
    #[error("response has no string at {pointer}: {body}")]
    MalformedResponse { pointer: String, body: String },
    #[error("gateway misconfigured: {0}")]
    Config(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    fingerprint: String,
    model: String,
    messages: Vec<ChatMessage>,
    temperature: f64,
    content: String,
}

/// One JSON file per request fingerprint.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    pub fn get(&self, fingerprint: &str) -> Result<Option<String>, GatewayError> {
        let path = self.path_for(fingerprint);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(GatewayError::CacheIo { path, source }),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| {
            GatewayError::CorruptCacheEntry { path: path.clone(), message: e.to_string() }
        })?;
        if entry.fingerprint != fingerprint {
            return Err(GatewayError::CorruptCacheEntry {
                path,
                message: format!("stored fingerprint {} does not match", entry.fingerprint),
            });
        }
        Ok(Some(entry.content))
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place.
    pub fn put(&self, request: &ChatRequest, content: &str) -> Result<(), GatewayError> {
        let io_err = |source| GatewayError::CacheIo { path: self.dir.clone(), source };
        fs::create_dir_all(&self.dir).map_err(io_err)?;
        let fingerprint = request.fingerprint();
        let entry = CacheEntry {
            fingerprint: fingerprint.clone(),
            model: request.model.clone(),
            messages: request.messages.clone(),
            temperature: request.temperature,
            content: content.to_string(),
        };
        let mut bytes = serde_json::to_vec_pretty(&entry).expect("entry serializes");
        bytes.push(b'\n');
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io_err)?;
        tmp.write_all(&bytes).map_err(io_err)?;
        tmp.as_file().sync_all().map_err(io_err)?;
        let target = self.path_for(&fingerprint);
        tmp.persist(&target)
            .map_err(|e| GatewayError::CacheIo { path: target, source: e.error })?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub endpoint: String,
    pub mode: GatewayMode,
    pub cache_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    /// JSON pointer to the completion text in a response body.
    pub content_pointer: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            mode: GatewayMode::Replay,
            cache_dir: None,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            api_key_env: None,
            content_pointer: DEFAULT_CONTENT_POINTER.into(),
        }
    }
}

pub struct LlmGateway {
    config: GatewayConfig,
    cache: Option<ResponseCache>,
    transport: Arc<dyn Transport>,
    api_key: Option<String>,
    permits: Semaphore,
    network_calls: AtomicUsize,
}

impl LlmGateway {
    pub fn new(config: GatewayConfig, transport: Arc<dyn Transport>) -> Result<Self, GatewayError> {
        let cache = config.cache_dir.clone().map(ResponseCache::new);
        if cache.is_none() && config.mode != GatewayMode::Live {
            return Err(GatewayError::Config(format!(
                "mode {} needs a cache directory",
                config.mode
            )));
        }
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|k| !k.is_empty());
        Ok(Self {
            permits: Semaphore::new(config.max_in_flight),
            config,
            cache,
            transport,
            api_key,
            network_calls: AtomicUsize::new(0),
        })
    }

    pub fn mode(&self) -> GatewayMode {
        self.config.mode
    }

    /// Requests sent over the network so far; a retried request counts once.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if self.config.mode == GatewayMode::Replay {
            let cache = self.cache.as_ref().expect("checked in new");
            let fingerprint = request.fingerprint();
            return match cache.get(&fingerprint)? {
                Some(content) => Ok(ChatResponse { content, cached: true, latency_ms: 0 }),
                None => Err(GatewayError::CacheMiss { fingerprint }),
            };
        }
        let started = Instant::now();
        let content = self.call(request)?;
        let latency_ms = started.elapsed().as_millis() as u64;
        if self.config.mode == GatewayMode::Record {
            self.cache.as_ref().expect("checked in new").put(request, &content)?;
        }
        Ok(ChatResponse { content, cached: false, latency_ms })
    }

    fn call(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let mut headers = Vec::new();
        if let Some(key) = &self.api_key {
            headers.push(("authorization".to_string(), format!("Bearer {key}")));
        }
        let reply = {
            let _permit = self.permits.acquire();
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            self.config.retry.post(
                self.transport.as_ref(),
                &self.config.endpoint,
                &headers,
                &request.wire_body(),
            )?
        };
        let malformed = || GatewayError::MalformedResponse {
            pointer: self.config.content_pointer.clone(),
            body: reply.body.clone(),
        };
        let value: Value = serde_json::from_str(&reply.body).map_err(|_| malformed())?;
        value
            .pointer(&self.config.content_pointer)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(malformed)
    }
}

//! Chat-completion client with content-addressed caching, bounded retries
//! and an in-flight request limit, over pluggable providers.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::retry::{InFlightLimit, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn new(model_id: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 1024,
        }
    }

    /// Hex SHA-256 over the request fields; the cache key.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(&(&self.model_id, &self.prompt, self.temperature, self.max_tokens))
            .expect("request serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    #[serde(default)]
    pub provider_meta: serde_json::Map<String, serde_json::Value>,
}

impl CompletionResult {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            provider_meta: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    /// Worth retrying: timeouts, rate limits, server errors.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider failure: {0}")]
    Fatal(String),
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("provider {provider} failed after {attempts} attempt(s): {source}")]
    Provider {
        provider: String,
        attempts: u32,
        #[source]
        source: ProviderError,
    },
    #[error("client configuration error: {0}")]
    Config(String),
    #[error("cache error at {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, ProviderError>;
}

// ---------------------------------------------------------------------------
// Providers

/// Replays responses from a directory of `<sha256(prompt)>.txt` files.
#[derive(Debug, Clone)]
pub struct MockDirProvider {
    dir: PathBuf,
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

impl MockDirProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn fixture_path(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_hash(prompt)))
    }

    /// Writes a fixture so that `prompt` replays `response`.
    pub fn record(&self, prompt: &str, response: &str) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.fixture_path(prompt);
        fs::write(&path, response)?;
        Ok(path)
    }
}

impl ChatProvider for MockDirProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        let path = self.fixture_path(&req.prompt);
        fs::read_to_string(&path)
            .map(CompletionResult::text)
            .map_err(|e| ProviderError::Fatal(format!("no mock fixture {}: {e}", path.display())))
    }
}

type ResponderFn = dyn Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync;

/// Provider backed by a closure; used for scripted agents in tests.
pub struct FnProvider {
    name: String,
    f: Box<ResponderFn>,
}

impl FnProvider {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }
}

impl ChatProvider for FnProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        (self.f)(req).map(CompletionResult::text)
    }
}

/// OpenAI-compatible `/chat/completions` endpoint.
pub struct RemoteChatProvider {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteChatProvider {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            agent,
        }
    }
}

/// Maps an HTTP status to a provider error class; `None` on success.
pub(crate) fn classify_status(status: u16, body: &str) -> Option<ProviderError> {
    match status {
        200..=299 => None,
        408 | 429 | 500..=599 => Some(ProviderError::Transient(format!("HTTP {status}: {body}"))),
        _ => Some(ProviderError::Fatal(format!("HTTP {status}: {body}"))),
    }
}

pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> Result<serde_json::Value, ProviderError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req
        .send_json(body)
        .map_err(|e| ProviderError::Transient(format!("request to {url} failed: {e}")))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| ProviderError::Transient(format!("reading response from {url}: {e}")))?;
    if let Some(err) = classify_status(status, &text) {
        return Err(err);
    }
    serde_json::from_str(&text).map_err(|e| ProviderError::Fatal(format!("bad JSON from {url}: {e}")))
}

impl ChatProvider for RemoteChatProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, ProviderError> {
        let body = serde_json::json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let v = post_json(&self.agent, &self.endpoint, self.api_key.as_deref(), &body)?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .ok_or_else(|| ProviderError::Fatal("response lacks choices[0].message.content".into()))?;
        let mut meta = serde_json::Map::new();
        if let Some(m) = v.get("model") {
            meta.insert("model".into(), m.clone());
        }
        if let Some(u) = v.get("usage") {
            meta.insert("usage".into(), u.clone());
        }
        Ok(CompletionResult {
            text: text.to_string(),
            provider_meta: meta,
        })
    }
}

// ---------------------------------------------------------------------------
// Cache

/// Content-addressed response cache: in memory, optionally mirrored to a
/// directory of `<hash>.json` files written via temp-file-then-rename.
#[derive(Debug, Default)]
pub struct ResponseCache {
    memory: Mutex<HashMap<String, CompletionResult>>,
    dir: Option<PathBuf>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self {
            memory: Mutex::default(),
            dir: Some(dir.into()),
        }
    }

    fn path(dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<CompletionResult> {
        if let Some(hit) = self.memory.lock().unwrap_or_else(|e| e.into_inner()).get(key) {
            return Some(hit.clone());
        }
        let dir = self.dir.as_ref()?;
        let text = fs::read_to_string(Self::path(dir, key)).ok()?;
        match serde_json::from_str::<CompletionResult>(&text) {
            Ok(r) => {
                self.memory
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .insert(key.to_string(), r.clone());
                Some(r)
            }
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn put(&self, key: &str, value: &CompletionResult) -> Result<(), ClientError> {
        if let Some(dir) = &self.dir {
            let cache_err = |message: String| ClientError::Cache {
                path: dir.clone(),
                message,
            };
            fs::create_dir_all(dir).map_err(|e| cache_err(e.to_string()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| cache_err(e.to_string()))?;
            serde_json::to_writer(&mut tmp, value).map_err(|e| cache_err(e.to_string()))?;
            tmp.flush().map_err(|e| cache_err(e.to_string()))?;
            tmp.persist(Self::path(dir, key))
                .map_err(|e| cache_err(e.to_string()))?;
        }
        self.memory
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key.to_string(), value.clone());
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Client

pub struct ChatClient {
    provider: Arc<dyn ChatProvider>,
    cache: ResponseCache,
    retry: RetryPolicy,
    limit: InFlightLimit,
    provider_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl ChatClient {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            provider,
            cache: ResponseCache::in_memory(),
            retry: RetryPolicy::default(),
            limit: InFlightLimit::new(4),
            provider_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.limit = InFlightLimit::new(max);
        self
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    /// Number of requests that reached the provider (retries included).
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn complete_chat(&self, req: &CompletionRequest) -> Result<CompletionResult, ClientError> {
        let key = req.content_hash();
        if let Some(hit) = self.cache.get(&key) {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit);
        }
        let result = {
            let _permit = self.limit.acquire();
            self.retry.run(
                || {
                    self.provider_calls.fetch_add(1, Ordering::SeqCst);
                    self.provider.complete(req)
                },
                |e| matches!(e, ProviderError::Transient(_)),
            )
        };
        match result {
            Ok(r) => {
                self.cache.put(&key, &r)?;
                Ok(r)
            }
            Err((source, attempts)) => Err(ClientError::Provider {
                provider: self.provider.name().to_string(),
                attempts,
                source,
            }),
        }
    }

    /// Convenience wrapper returning only the text.
    pub fn ask(&self, model_id: &str, prompt: &str) -> Result<String, ClientError> {
        self.complete_chat(&CompletionRequest::new(model_id, prompt))
            .map(|r| r.text)
    }
}

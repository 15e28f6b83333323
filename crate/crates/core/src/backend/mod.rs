//! Chat backends: the trait every responder implements, usage accounting,
//! and the concrete scripted / HTTP / cached flavors.

mod cache;
mod http;
mod scripted;

pub use cache::{CachingBackend, ReplayBackend, ResponseCache};
pub use http::{backoff_delay, HttpBackend};
pub use scripted::{ScriptedBackend, ScriptedPolicy};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::config::{BackendKind, SimConfig};
use crate::util::text::whitespace_tokens;

/// Which part of the pipeline issued a request. Usage is reported per site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallSite {
    Decision,
    Summarization,
    Prediction,
}

impl CallSite {
    pub fn as_str(self) -> &'static str {
        match self {
            CallSite::Decision => "decision",
            CallSite::Summarization => "summarization",
            CallSite::Prediction => "prediction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    /// "system", "user" or "assistant".
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub site: CallSite,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn new(site: CallSite, cfg: &SimConfig, messages: Vec<ChatMessage>) -> Self {
        ChatRequest { site, model: cfg.model.clone(), temperature: cfg.temperature, messages }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    /// Token counts as reported by the server; None means not reported.
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error talking to {url}: {message}")]
    Transport { url: String, message: String },
    #[error("backend returned status {status} after {attempts} attempts: {body}")]
    Status { status: u16, attempts: u32, body: String },
    #[error("backend response malformed: {0}")]
    Malformed(String),
    #[error("auth env var {0} is not set")]
    MissingAuth(String),
    #[error("cache miss in replay mode for request digest {0}")]
    ReplayMiss(String),
    #[error("cache io at {path}: {message}")]
    CacheIo { path: String, message: String },
}

/// A synchronous chat responder. Implementations must be safe to call from
/// several worker threads at once.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

/// One completed call.
#[derive(Debug, Clone, Serialize)]
pub struct UsageEntry {
    pub site: CallSite,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteUsage {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_ms: u64,
}

impl SiteUsage {
    fn add(&mut self, entry: &UsageEntry) {
        self.calls += 1;
        self.prompt_tokens += entry.prompt_tokens;
        self.completion_tokens += entry.completion_tokens;
        self.wall_ms += entry.wall.as_millis() as u64;
    }
}

/// Aggregated usage, one row per call site plus a grand total.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageReport {
    pub per_site: BTreeMap<String, SiteUsage>,
    pub total: SiteUsage,
}

/// Thread-safe ledger of every backend call made during a run.
#[derive(Debug, Default)]
pub struct UsageLedger {
    entries: Mutex<Vec<UsageEntry>>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, entry: UsageEntry) {
        self.entries.lock().expect("ledger lock").push(entry);
    }

    pub fn entries(&self) -> Vec<UsageEntry> {
        self.entries.lock().expect("ledger lock").clone()
    }

    /// Aggregates entries; totals are exactly the sum over per-site rows.
    pub fn report(&self) -> UsageReport {
        let mut report = UsageReport::default();
        for entry in self.entries.lock().expect("ledger lock").iter() {
            report.per_site.entry(entry.site.as_str().to_string()).or_default().add(entry);
            report.total.add(entry);
        }
        report
    }
}

/// Issues a request, times it, and records usage. When the backend reports
/// no token counts, whitespace tokens over the message texts approximate
/// them.
pub fn complete_tracked(
    backend: &dyn ChatBackend,
    ledger: &UsageLedger,
    request: &ChatRequest,
) -> Result<ChatResponse, BackendError> {
    let start = Instant::now();
    let response = backend.complete(request)?;
    let wall = start.elapsed();
    let prompt_tokens = response.prompt_tokens.unwrap_or_else(|| {
        request.messages.iter().map(|m| whitespace_tokens(&m.content)).sum()
    });
    let completion_tokens =
        response.completion_tokens.unwrap_or_else(|| whitespace_tokens(&response.text));
    ledger.record(UsageEntry {
        site: request.site,
        prompt_tokens,
        completion_tokens,
        wall,
    });
    Ok(ChatResponse {
        text: response.text,
        prompt_tokens: Some(prompt_tokens),
        completion_tokens: Some(completion_tokens),
    })
}

/// Builds the backend stack the config asks for: scripted, http (optionally
/// wrapped in a write-through cache), or cache-only replay.
pub fn build_backend(cfg: &SimConfig) -> Result<Box<dyn ChatBackend>, BackendError> {
    match cfg.backend {
        BackendKind::Scripted => Ok(Box::new(ScriptedBackend::new(ScriptedPolicy::from_config(cfg)))),
        BackendKind::Http => {
            let http = HttpBackend::from_config(cfg)?;
            if cfg.cache_dir.is_empty() {
                Ok(Box::new(http))
            } else {
                let cache = ResponseCache::open(cfg.cache_dir.as_ref())?;
                Ok(Box::new(CachingBackend::new(http, cache)))
            }
        }
        BackendKind::Replay => {
            let cache = ResponseCache::open(cfg.cache_dir.as_ref())?;
            Ok(Box::new(ReplayBackend::new(cache)))
        }
    }
}

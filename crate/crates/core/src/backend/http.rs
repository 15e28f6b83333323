//! Chat-completions client. Auth comes from an env var named in the config;
//! 429 and 5xx responses are retried with exponential backoff and a small
//! deterministic jitter.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::config::SimConfig;
use crate::util::rng::{mix, unit_f64};

/// Delay before retry `attempt` (0-based): initial * 2^attempt, stretched by
/// a jitter factor in [1.0, 1.25). Doubling dominates the jitter, so delays
/// strictly increase.
pub fn backoff_delay(initial_ms: u64, attempt: u32, salt: u64) -> Duration {
    let base = initial_ms.saturating_mul(1u64 << attempt.min(16)) as f64;
    let jitter = 1.0 + 0.25 * unit_f64(mix(&[salt, attempt as u64]));
    Duration::from_millis((base * jitter) as u64)
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: String,
    max_retries: u32,
    initial_backoff_ms: u64,
    retries_seen: AtomicU64,
}

impl HttpBackend {
    pub fn from_config(cfg: &SimConfig) -> Result<HttpBackend, BackendError> {
        let api_key = std::env::var(&cfg.auth_env)
            .map_err(|_| BackendError::MissingAuth(cfg.auth_env.clone()))?;
        let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| BackendError::Transport { url: url.clone(), message: e.to_string() })?;
        Ok(HttpBackend {
            client,
            url,
            api_key,
            max_retries: cfg.max_retries,
            initial_backoff_ms: cfg.initial_backoff_ms,
            retries_seen: AtomicU64::new(0),
        })
    }

    /// Total retries performed so far, across all requests.
    pub fn retries(&self) -> u64 {
        self.retries_seen.load(Ordering::Relaxed)
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: Option<u64>,
    #[serde(default)]
    completion_tokens: Option<u64>,
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let salt = mix(&[request.messages.len() as u64, request.site as u64]);
        let mut last_status = 0u16;
        let mut last_body = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(self.initial_backoff_ms, attempt - 1, salt));
                self.retries_seen.fetch_add(1, Ordering::Relaxed);
            }
            let sent = self
                .client
                .post(&self.url)
                .bearer_auth(&self.api_key)
                .json(&body)
                .send();
            let resp = match sent {
                Ok(resp) => resp,
                Err(e) => {
                    // Connection-level failures are retried like 5xx.
                    last_status = 0;
                    last_body = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            if status == 429 || (500..600).contains(&status) {
                last_status = status;
                last_body = resp.text().unwrap_or_default();
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(BackendError::Status {
                    status,
                    attempts: attempt + 1,
                    body: resp.text().unwrap_or_default(),
                });
            }
            let wire: WireResponse = resp
                .json()
                .map_err(|e| BackendError::Malformed(format!("bad completion json: {e}")))?;
            let choice = wire
                .choices
                .into_iter()
                .next()
                .ok_or_else(|| BackendError::Malformed("completion has no choices".into()))?;
            let usage = wire.usage.unwrap_or(WireUsage { prompt_tokens: None, completion_tokens: None });
            return Ok(ChatResponse {
                text: choice.message.content,
                prompt_tokens: usage.prompt_tokens,
                completion_tokens: usage.completion_tokens,
            });
        }
        if last_status == 0 {
            Err(BackendError::Transport { url: self.url.clone(), message: last_body })
        } else {
            Err(BackendError::Status {
                status: last_status,
                attempts: self.max_retries + 1,
                body: last_body,
            })
        }
    }
}

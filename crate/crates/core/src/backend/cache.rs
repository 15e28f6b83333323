//! Content-addressed response cache. The key hashes the normalized request
//! (whitespace-collapsed message texts plus model and temperature), so
//! formatting-only drift does not fork cache entries. Used write-through
//! around the HTTP backend and standalone for offline replay.

use std::path::{Path, PathBuf};

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::util::digest::sha256_hex;

pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<ResponseCache, BackendError> {
        std::fs::create_dir_all(dir).map_err(|e| BackendError::CacheIo {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(ResponseCache { dir: dir.to_path_buf() })
    }

    /// Cache key for a request: SHA-256 of its normalized form.
    pub fn key(request: &ChatRequest) -> String {
        let mut canon = String::new();
        canon.push_str(&request.model);
        canon.push('\x1f');
        canon.push_str(&format!("{:.6}", request.temperature));
        for msg in &request.messages {
            canon.push('\x1f');
            canon.push_str(&msg.role);
            canon.push('\x1e');
            // Collapse runs of whitespace so trailing spaces or newline
            // style cannot split the key.
            for (i, word) in msg.content.split_whitespace().enumerate() {
                if i > 0 {
                    canon.push(' ');
                }
                canon.push_str(word);
            }
        }
        sha256_hex(canon.as_bytes())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<ChatResponse>, BackendError> {
        let path = self.path_for(key);
        let raw = match std::fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(BackendError::CacheIo {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            }
        };
        let resp = serde_json::from_str(&raw).map_err(|e| BackendError::CacheIo {
            path: path.display().to_string(),
            message: format!("corrupt cache entry: {e}"),
        })?;
        Ok(Some(resp))
    }

    pub fn put(&self, key: &str, response: &ChatResponse) -> Result<(), BackendError> {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.tmp"));
        let io_err = |p: &Path, e: std::io::Error| BackendError::CacheIo {
            path: p.display().to_string(),
            message: e.to_string(),
        };
        let raw = serde_json::to_string_pretty(response)
            .map_err(|e| BackendError::CacheIo { path: path.display().to_string(), message: e.to_string() })?;
        std::fs::write(&tmp, raw).map_err(|e| io_err(&tmp, e))?;
        // Rename makes the entry appear atomically for concurrent readers.
        std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
    }
}

/// Write-through cache around another backend.
pub struct CachingBackend<B> {
    inner: B,
    cache: ResponseCache,
}

impl<B: ChatBackend> CachingBackend<B> {
    pub fn new(inner: B, cache: ResponseCache) -> Self {
        CachingBackend { inner, cache }
    }
}

impl<B: ChatBackend> ChatBackend for CachingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let key = ResponseCache::key(request);
        if let Some(hit) = self.cache.get(&key)? {
            return Ok(hit);
        }
        let resp = self.inner.complete(request)?;
        self.cache.put(&key, &resp)?;
        Ok(resp)
    }
}

/// Serves exclusively from a cache directory; a miss is a hard error. Lets a
/// recorded run be replayed bit-for-bit with no network.
pub struct ReplayBackend {
    cache: ResponseCache,
}

impl ReplayBackend {
    pub fn new(cache: ResponseCache) -> Self {
        ReplayBackend { cache }
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let key = ResponseCache::key(request);
        self.cache.get(&key)?.ok_or(BackendError::ReplayMiss(key))
    }
}

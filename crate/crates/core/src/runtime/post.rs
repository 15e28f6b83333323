//! User-generated content items and their on-disk form: a line-delimited
//! JSON file with a versioned header.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

pub const POSTS_FORMAT: &str = "ugcsim/posts";
pub const POSTS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PostError {
    #[error("cannot {action} {path}: {message}")]
    Io { action: &'static str, path: String, message: String },
    #[error("bad posts file {path}: {message}")]
    Format { path: String, message: String },
}

/// One content item entering the sandbox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UgcPost {
    pub id: String,
    pub text: String,
    /// Caption or path of an attached image; surfaced in prompts as text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    /// Descriptive fields in their authored order (category, author, ...).
    #[serde(default)]
    pub metadata: IndexMap<String, serde_json::Value>,
    /// Ground-truth popularity, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
}

impl UgcPost {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        UgcPost {
            id: id.into(),
            text: text.into(),
            image_ref: None,
            metadata: IndexMap::new(),
            label: None,
        }
    }
}

fn io_err(action: &'static str, path: &Path, e: std::io::Error) -> PostError {
    PostError::Io { action, path: path.display().to_string(), message: e.to_string() }
}

fn format_err(path: &Path, message: impl Into<String>) -> PostError {
    PostError::Format { path: path.display().to_string(), message: message.into() }
}

pub fn write_posts(path: &Path, posts: &[UgcPost]) -> Result<(), PostError> {
    let file = std::fs::File::create(path).map_err(|e| io_err("write", path, e))?;
    let mut w = BufWriter::new(file);
    let header = json!({"format": POSTS_FORMAT, "version": POSTS_VERSION, "n": posts.len()});
    serde_json::to_writer(&mut w, &header).map_err(|e| format_err(path, e.to_string()))?;
    w.write_all(b"\n").map_err(|e| io_err("write", path, e))?;
    for post in posts {
        serde_json::to_writer(&mut w, post).map_err(|e| format_err(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| io_err("write", path, e))?;
    }
    w.flush().map_err(|e| io_err("write", path, e))
}

/// Reads and validates a posts file: ids must be unique and non-empty, text
/// non-empty.
pub fn read_posts(path: &Path) -> Result<Vec<UgcPost>, PostError> {
    let file = std::fs::File::open(path).map_err(|e| io_err("read", path, e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .map_err(|e| io_err("read", path, e))?;
    let header: serde_json::Value = serde_json::from_str(&header_line)
        .map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if header["format"] != POSTS_FORMAT {
        return Err(format_err(path, format!("unexpected format {}", header["format"])));
    }
    if header["version"] != POSTS_VERSION {
        return Err(format_err(path, format!("unsupported version {}", header["version"])));
    }
    let mut posts = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err("read", path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let post: UgcPost = serde_json::from_str(&line)
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 2)))?;
        if post.id.trim().is_empty() {
            return Err(format_err(path, format!("line {}: empty post id", i + 2)));
        }
        if post.text.trim().is_empty() {
            return Err(format_err(path, format!("line {}: post {} has empty text", i + 2, post.id)));
        }
        if !seen.insert(post.id.clone()) {
            return Err(format_err(path, format!("line {}: duplicate post id {}", i + 2, post.id)));
        }
        posts.push(post);
    }
    Ok(posts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<UgcPost> {
        let mut a = UgcPost::new("p1", "sunrise over the ridge");
        a.metadata.insert("Category".into(), json!("outdoors"));
        a.metadata.insert("AuthorFollowers".into(), json!(1520));
        a.label = Some(7.0);
        let mut b = UgcPost::new("p2", "patch notes for the tuesday build");
        b.image_ref = Some("screenshot of the changelog".into());
        vec![a, b]
    }

    #[test]
    fn posts_round_trip_preserving_metadata_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        let posts = sample();
        write_posts(&path, &posts).unwrap();
        let back = read_posts(&path).unwrap();
        assert_eq!(back, posts);
        let keys: Vec<&String> = back[0].metadata.keys().collect();
        assert_eq!(keys, ["Category", "AuthorFollowers"]);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        let posts = vec![UgcPost::new("p1", "a"), UgcPost::new("p1", "b")];
        write_posts(&path, &posts).unwrap();
        let err = read_posts(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate post id"), "{err}");
    }

    #[test]
    fn empty_text_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        write_posts(&path, &[UgcPost::new("p1", "  ")]).unwrap();
        let err = read_posts(&path).unwrap_err();
        assert!(err.to_string().contains("empty text"), "{err}");
    }

    #[test]
    fn missing_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        std::fs::write(&path, "{\"id\":\"p1\",\"text\":\"x\"}\n").unwrap();
        let err = read_posts(&path).unwrap_err();
        assert!(err.to_string().contains("unexpected format"), "{err}");
    }
}

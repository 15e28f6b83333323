//! Popularity prediction: metadata enrichment, prompt-based scoring, a
//! closed-form ridge baseline, and evaluation metrics.

pub mod enrich;
pub mod metrics;
pub mod ridge;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::backend::{
    complete_tracked, BackendError, CallSite, ChatBackend, ChatMessage, ChatRequest, UsageLedger,
};
use crate::config::SimConfig;
use crate::prompt::{fill, PromptSet};
use crate::runtime::{PropagationFeatures, UgcPost};

pub use enrich::{aggregate_metadata, EnrichedText, FieldMap};
pub use metrics::{cross_entropy, evaluate, mae, mse, spearman, EvalReport};
pub use ridge::{popularity_features, ridge_fit, RidgeModel, FEATURE_NAMES};

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("bad input shape: {0}")]
    Shape(String),
    #[error("regression matrix is singular; raise lambda or drop collinear features")]
    Singular,
    #[error("rank correlation undefined: {0}")]
    SrcUndefined(String),
    #[error("post {post_id}: no parseable score after a reprompt; last reply {reply:?}")]
    Malformed { post_id: String, reply: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Which path produced a predicted score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    PromptModel,
    NumericBaseline,
}

/// One scored post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub post_id: String,
    pub predicted: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
    pub source: PredictionSource,
}

/// A post whose score could not be produced; kept in the output file so a
/// batch is accounted for line by line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionErrorRecord {
    pub post_id: String,
    pub error: String,
}

/// One line of a predictions file. The two shapes share no required keys,
/// so untagged deserialization is unambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionLine {
    Scored(PredictionRecord),
    Failed(PredictionErrorRecord),
}

fn format_bound(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

/// Fills the prediction template with the enriched post and label range.
pub fn build_predict_prompt(
    prompts: &PromptSet,
    cfg: &SimConfig,
    enriched: &EnrichedText,
    image_ref: Option<&str>,
) -> String {
    let image_line = match image_ref {
        Some(r) => format!("\nThe post has an attached image described as: {r}"),
        None => String::new(),
    };
    let values = HashMap::from([
        ("enriched", enriched.text.clone()),
        ("image_line", image_line),
        ("label_min", format_bound(cfg.label_min)),
        ("label_max", format_bound(cfg.label_max)),
    ]);
    fill(&prompts.predict, &values)
}

/// Finds a `SCORE: <number>` line and clamps the number to the label range.
pub fn parse_score(reply: &str, label_min: f64, label_max: f64) -> Option<f64> {
    for line in reply.lines() {
        let trimmed = line.trim();
        let bytes = trimmed.as_bytes();
        if bytes.len() < 5 || !bytes[..5].eq_ignore_ascii_case(b"SCORE") {
            continue;
        }
        let Some(value) = trimmed[5..].trim_start().strip_prefix(':') else {
            continue;
        };
        if let Ok(x) = value.trim().parse::<f64>() {
            if x.is_finite() {
                return Some(x.clamp(label_min, label_max));
            }
        }
    }
    None
}

/// Scores one post through the chat backend, reprompting once on a
/// malformed reply. The enriched text carries the propagation features, so
/// prediction sees the simulation outcome without any extra plumbing.
pub fn predict_post(
    backend: &dyn ChatBackend,
    ledger: &UsageLedger,
    cfg: &SimConfig,
    prompts: &PromptSet,
    map: &FieldMap,
    post: &UgcPost,
    features: Option<&PropagationFeatures>,
) -> Result<PredictionRecord, PredictError> {
    let enriched = aggregate_metadata(post, features, map);
    let prompt = build_predict_prompt(prompts, cfg, &enriched, post.image_ref.as_deref());
    let request = ChatRequest::new(CallSite::Prediction, cfg, vec![ChatMessage::user(&prompt)]);
    let mut reply = complete_tracked(backend, ledger, &request)?.text;
    let mut score = parse_score(&reply, cfg.label_min, cfg.label_max);
    if score.is_none() {
        log::warn!("post {}: malformed score reply, reprompting", post.id);
        let retry = ChatRequest::new(
            CallSite::Prediction,
            cfg,
            vec![
                ChatMessage::user(&prompt),
                ChatMessage::assistant(&reply),
                ChatMessage::user(&prompts.reprompt_predict),
            ],
        );
        reply = complete_tracked(backend, ledger, &retry)?.text;
        score = parse_score(&reply, cfg.label_min, cfg.label_max);
    }
    match score {
        Some(predicted) => Ok(PredictionRecord {
            post_id: post.id.clone(),
            predicted,
            label: post.label,
            source: PredictionSource::PromptModel,
        }),
        None => Err(PredictError::Malformed { post_id: post.id.clone(), reply }),
    }
}

/// Splits a batch into scored records and per-post failures.
pub fn extract_usable(
    lines: &[PredictionLine],
) -> (Vec<PredictionRecord>, Vec<&PredictionErrorRecord>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for line in lines {
        match line {
            PredictionLine::Scored(r) => records.push(r.clone()),
            PredictionLine::Failed(f) => failures.push(f),
        }
    }
    (records, failures)
}

pub const PREDICTIONS_FORMAT: &str = "ugcsim/predictions";
pub const EVAL_FORMAT: &str = "ugcsim/eval";
pub const RECORD_VERSION: u32 = 1;

/// First line of a predictions or eval file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: String,
    pub version: u32,
    pub config_digest: String,
    pub label_min: f64,
    pub label_max: f64,
    pub field_map_version: String,
}

impl RecordHeader {
    pub fn new(format: &str, cfg: &SimConfig, field_map_version: &str) -> RecordHeader {
        RecordHeader {
            format: format.to_string(),
            version: RECORD_VERSION,
            config_digest: cfg.digest(),
            label_min: cfg.label_min,
            label_max: cfg.label_max,
            field_map_version: field_map_version.to_string(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> PredictError {
    PredictError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn format_err(path: &Path, message: impl Into<String>) -> PredictError {
    PredictError::Format { path: path.display().to_string(), message: message.into() }
}

fn write_record_file<T: Serialize>(
    path: &Path,
    header: &RecordHeader,
    lines: &[T],
) -> Result<(), PredictError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |value: String| -> Result<(), PredictError> {
        w.write_all(value.as_bytes()).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))
    };
    emit(serde_json::to_string(header).expect("header serializes"))?;
    for line in lines {
        emit(serde_json::to_string(line).expect("record serializes"))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn read_record_file<T: for<'de> Deserialize<'de>>(
    path: &Path,
    expected_format: &str,
) -> Result<(RecordHeader, Vec<T>), PredictError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .map_err(|e| io_err(path, e))?;
    let header: RecordHeader = serde_json::from_str(&first)
        .map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if header.format != expected_format {
        return Err(format_err(
            path,
            format!("expected format {expected_format}, found {}", header.format),
        ));
    }
    if header.version != RECORD_VERSION {
        return Err(format_err(path, format!("unsupported version {}", header.version)));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 2)))?;
        records.push(record);
    }
    Ok((header, records))
}

pub fn write_predictions(
    path: &Path,
    header: &RecordHeader,
    lines: &[PredictionLine],
) -> Result<(), PredictError> {
    write_record_file(path, header, lines)
}

pub fn read_predictions(
    path: &Path,
) -> Result<(RecordHeader, Vec<PredictionLine>), PredictError> {
    read_record_file(path, PREDICTIONS_FORMAT)
}

pub fn write_eval_report(
    path: &Path,
    header: &RecordHeader,
    report: &EvalReport,
) -> Result<(), PredictError> {
    write_record_file(path, header, std::slice::from_ref(report))
}

pub fn read_eval_report(path: &Path) -> Result<(RecordHeader, EvalReport), PredictError> {
    let (header, mut reports) = read_record_file::<EvalReport>(path, EVAL_FORMAT)?;
    match (reports.pop(), reports.is_empty()) {
        (Some(report), true) => Ok((header, report)),
        _ => Err(format_err(path, "expected exactly one report line")),
    }
}

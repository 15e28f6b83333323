//! Propagation traces: the per-step record of who activated, what they did,
//! and both mean fields; plus the feature summary handed to prediction.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

use crate::config::SimMode;
use crate::meanfield::{ActionKind, AgentAction};
use crate::util::digest::sha256_hex;

pub const TRACE_FORMAT: &str = "ugcsim/trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot {action} {path}: {message}")]
    Io { action: &'static str, path: String, message: String },
    #[error("bad trace file {path}: {message}")]
    Format { path: String, message: String },
    #[error("trace for post {0} is incomplete; features need a finished run")]
    Incomplete(String),
}

/// Everything that happened in one simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    /// Agents that activated this step, ascending.
    pub activated: Vec<u32>,
    /// Their decisions, ascending by agent, silent ones included.
    pub actions: Vec<AgentAction>,
    /// Mean opinion after the step's opinion update.
    pub m_num: f64,
    /// Textual mean field after this step; empty outside smf mode.
    pub m_text: String,
    /// SHA-256 over the post-step opinion vector bits.
    pub opinion_digest: String,
}

/// Digest of an opinion vector: the little-endian f64 bits in id order.
pub fn opinion_digest(opinions: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(opinions.len() * 8);
    for o in opinions {
        bytes.extend_from_slice(&o.to_le_bytes());
    }
    sha256_hex(&bytes)
}

/// Full record of one post's run through the sandbox.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationTrace {
    pub post_id: String,
    pub seed: u64,
    pub mode: SimMode,
    pub n_agents: u32,
    pub rounds: u32,
    pub config_digest: String,
    pub steps: Vec<StepRecord>,
    pub final_opinions: Vec<f64>,
    /// Decisions that fell back to do-nothing after a failed reprompt.
    pub warnings: u32,
    /// False when the run aborted (backend failure) partway.
    pub complete: bool,
}

/// Per-kind action counts across a whole trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionHistogram {
    pub post: u64,
    pub retweet: u64,
    pub reply: u64,
    pub like: u64,
    pub do_nothing: u64,
}

impl ActionHistogram {
    pub fn count(&mut self, kind: ActionKind) {
        match kind {
            ActionKind::Post => self.post += 1,
            ActionKind::Retweet => self.retweet += 1,
            ActionKind::Reply => self.reply += 1,
            ActionKind::Like => self.like += 1,
            ActionKind::DoNothing => self.do_nothing += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.post + self.retweet + self.reply + self.like + self.do_nothing
    }

    pub fn get(&self, kind: ActionKind) -> u64 {
        match kind {
            ActionKind::Post => self.post,
            ActionKind::Retweet => self.retweet,
            ActionKind::Reply => self.reply,
            ActionKind::Like => self.like,
            ActionKind::DoNothing => self.do_nothing,
        }
    }
}

/// Propagation features for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationFeatures {
    /// Mean opinion after each step, in step order.
    pub m_num_series: Vec<f64>,
    /// The last textual mean field of the run.
    pub final_summary: String,
    pub action_histogram: ActionHistogram,
    /// Fraction of all agents whose final opinion exceeds 7.5.
    pub share_above_7_5: f64,
}

/// Condenses a finished trace into features. Incomplete traces are refused:
/// their tail would silently bias every downstream number.
pub fn extract_features(trace: &PropagationTrace) -> Result<PropagationFeatures, TraceError> {
    if !trace.complete {
        return Err(TraceError::Incomplete(trace.post_id.clone()));
    }
    let mut histogram = ActionHistogram::default();
    for step in &trace.steps {
        for action in &step.actions {
            histogram.count(action.kind);
        }
    }
    let above = trace.final_opinions.iter().filter(|&&o| o > 7.5).count();
    let share = if trace.final_opinions.is_empty() {
        0.0
    } else {
        above as f64 / trace.final_opinions.len() as f64
    };
    let final_summary = trace
        .steps
        .iter()
        .rev()
        .map(|s| s.m_text.clone())
        .find(|t| !t.is_empty())
        .unwrap_or_default();
    Ok(PropagationFeatures {
        m_num_series: trace.steps.iter().map(|s| s.m_num).collect(),
        final_summary,
        action_histogram: histogram,
        share_above_7_5: share,
    })
}

fn io_err(action: &'static str, path: &Path, e: std::io::Error) -> TraceError {
    TraceError::Io { action, path: path.display().to_string(), message: e.to_string() }
}

fn format_err(path: &Path, message: impl Into<String>) -> TraceError {
    TraceError::Format { path: path.display().to_string(), message: message.into() }
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    format: String,
    version: u32,
    post_id: String,
    seed: u64,
    mode: SimMode,
    n_agents: u32,
    rounds: u32,
    config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct TraceFooter {
    final_opinions: Vec<f64>,
    warnings: u32,
    complete: bool,
}

/// Writes header, one line per step, then the footer. Lines are only ever
/// appended; rewriting would invalidate the byte-determinism contract.
pub fn write_trace(path: &Path, trace: &PropagationTrace) -> Result<(), TraceError> {
    let file = std::fs::File::create(path).map_err(|e| io_err("write", path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = |value: serde_json::Value| -> Result<(), TraceError> {
        serde_json::to_writer(&mut w, &value).map_err(|e| format_err(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| io_err("write", path, e))
    };
    let header = TraceHeader {
        format: TRACE_FORMAT.into(),
        version: TRACE_VERSION,
        post_id: trace.post_id.clone(),
        seed: trace.seed,
        mode: trace.mode,
        n_agents: trace.n_agents,
        rounds: trace.rounds,
        config_digest: trace.config_digest.clone(),
    };
    line(serde_json::to_value(&header).map_err(|e| format_err(path, e.to_string()))?)?;
    for step in &trace.steps {
        line(serde_json::to_value(step).map_err(|e| format_err(path, e.to_string()))?)?;
    }
    let footer = TraceFooter {
        final_opinions: trace.final_opinions.clone(),
        warnings: trace.warnings,
        complete: trace.complete,
    };
    line(serde_json::to_value(&footer).map_err(|e| format_err(path, e.to_string()))?)?;
    w.flush().map_err(|e| io_err("write", path, e))
}

pub fn read_trace(path: &Path) -> Result<PropagationTrace, TraceError> {
    let file = std::fs::File::open(path).map_err(|e| io_err("read", path, e))?;
    let mut lines = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err("read", path, e))?;
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    if lines.len() < 2 {
        return Err(format_err(path, "expected at least a header and a footer"));
    }
    let header: TraceHeader = serde_json::from_str(&lines[0])
        .map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if header.format != TRACE_FORMAT {
        return Err(format_err(path, format!("unexpected format {}", header.format)));
    }
    if header.version != TRACE_VERSION {
        return Err(format_err(path, format!("unsupported version {}", header.version)));
    }
    let footer: TraceFooter = serde_json::from_str(lines.last().unwrap())
        .map_err(|e| format_err(path, format!("bad footer: {e}")))?;
    let mut steps = Vec::with_capacity(lines.len() - 2);
    for (i, line) in lines[1..lines.len() - 1].iter().enumerate() {
        let step: StepRecord = serde_json::from_str(line)
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 2)))?;
        if step.step != (i + 1) as u32 {
            return Err(format_err(path, format!("line {}: steps out of order", i + 2)));
        }
        steps.push(step);
    }
    if footer.complete && steps.len() != header.rounds as usize {
        return Err(format_err(
            path,
            format!("complete trace has {} steps, header says {} rounds", steps.len(), header.rounds),
        ));
    }
    if footer.complete && footer.final_opinions.len() != header.n_agents as usize {
        return Err(format_err(path, "final opinion count does not match n_agents"));
    }
    Ok(PropagationTrace {
        post_id: header.post_id,
        seed: header.seed,
        mode: header.mode,
        n_agents: header.n_agents,
        rounds: header.rounds,
        config_digest: header.config_digest,
        steps,
        final_opinions: footer.final_opinions,
        warnings: footer.warnings,
        complete: footer.complete,
    })
}

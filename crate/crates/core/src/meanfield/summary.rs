//! The running propagation summary. One backend call per step with
//! activity; idle steps reuse the previous text so a quiet network costs
//! nothing.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::backend::{complete_tracked, BackendError, CallSite, ChatBackend, ChatMessage, ChatRequest, UsageLedger};
use crate::config::SimConfig;
use crate::prompt::{fill, PromptSet};
use crate::util::text::truncate_chars;

/// Summary shown before anyone has reacted.
pub const NO_ACTIVITY_SUMMARY: &str = "No activity yet; the post has not drawn any reactions.";

/// The textual mean field after a given step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextMeanFieldState {
    pub step: u32,
    pub summary: String,
}

impl TextMeanFieldState {
    pub fn initial() -> Self {
        TextMeanFieldState { step: 0, summary: String::new() }
    }
}

/// Folds this step's textualized actions into the running summary.
///
/// No actions: the previous summary is carried forward verbatim (or the
/// no-activity sentinel if there is none yet) without any backend call.
/// Otherwise: exactly one summarization call, output truncated to the
/// configured cap.
pub fn summarize_mean_field(
    prev: &TextMeanFieldState,
    actions: &[String],
    ugc_text: &str,
    backend: &dyn ChatBackend,
    ledger: &UsageLedger,
    prompts: &PromptSet,
    cfg: &SimConfig,
) -> Result<TextMeanFieldState, BackendError> {
    let step = prev.step + 1;
    if actions.is_empty() {
        let summary = if prev.summary.is_empty() {
            NO_ACTIVITY_SUMMARY.to_string()
        } else {
            prev.summary.clone()
        };
        return Ok(TextMeanFieldState { step, summary });
    }
    let action_lines: Vec<String> = actions.iter().map(|a| format!("- {a}")).collect();
    let prev_text = if prev.summary.is_empty() { "(none)".to_string() } else { prev.summary.clone() };
    let values = HashMap::from([
        ("prev_summary", prev_text),
        ("actions", action_lines.join("\n")),
        ("ugc_text", ugc_text.to_string()),
    ]);
    let prompt = fill(&prompts.summarize, &values);
    let request = ChatRequest::new(CallSite::Summarization, cfg, vec![ChatMessage::user(prompt)]);
    let response = complete_tracked(backend, ledger, &request)?;
    let summary = truncate_chars(response.text.trim(), cfg.summary_cap_chars);
    Ok(TextMeanFieldState { step, summary })
}

//! Decision prompts and the parser for the structured four-line answer.

use std::collections::HashMap;

use thiserror::Error;

use crate::meanfield::{ActionError, ActionKind, AgentAction};
use crate::population::AgentState;
use crate::prompt::{fill, PromptSet};
use crate::runtime::UgcPost;

#[derive(Debug, Error, PartialEq)]
pub enum DecisionParseError {
    #[error("response is missing the {0} line")]
    MissingField(&'static str),
    #[error("unrecognized action {0:?}")]
    BadAction(String),
    #[error("opinion {0:?} is not a number")]
    BadOpinion(String),
    #[error(transparent)]
    InvalidAction(#[from] ActionError),
}

/// What one agent decided this step.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub action: AgentAction,
    /// Updated opinion of the focal post, already clamped to [0, 10].
    pub opinion: f64,
}

/// Renders the decision prompt for one agent: persona, current opinion, the
/// post, the last `memory_k` memory entries, and the mode-specific social
/// context block.
pub fn build_decision_prompt(
    agent: &AgentState,
    post: &UgcPost,
    context: &str,
    prompts: &PromptSet,
    memory_k: usize,
) -> String {
    let start = agent.memory.len().saturating_sub(memory_k);
    let memory = if agent.memory.is_empty() {
        "(no prior interactions)".to_string()
    } else {
        agent
            .memory
            .iter()
            .skip(start)
            .map(|m| format!("- [step {}] {}", m.step, m.content))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let image_line = match &post.image_ref {
        Some(caption) => format!("\nAttached image: {caption}"),
        None => String::new(),
    };
    let values = HashMap::from([
        ("name", agent.persona.name.clone()),
        ("gender", agent.persona.gender.clone()),
        ("occupation", agent.persona.occupation.clone()),
        ("interests", agent.persona.interests.join(", ")),
        ("personality", agent.persona.personality.join(", ")),
        ("post_id", post.id.clone()),
        ("opinion", format!("{:.1}", agent.opinion)),
        ("post_text", post.text.clone()),
        ("image_line", image_line),
        ("memory", memory),
        ("context", context.to_string()),
    ]);
    fill(&prompts.decision, &values)
}

fn field_value(response: &str, key: &str) -> Option<String> {
    response.lines().find_map(|line| {
        let trimmed = line.trim();
        if trimmed.len() < key.len()
            || !trimmed.as_bytes()[..key.len()].eq_ignore_ascii_case(key.as_bytes())
        {
            return None;
        }
        let rest = trimmed[key.len()..].trim_start().strip_prefix(':')?;
        Some(rest.trim().to_string())
    })
}

fn optional(value: Option<String>) -> Option<String> {
    let v = value?;
    let lower = v.to_lowercase();
    if v.is_empty() || lower == "none" || lower == "n/a" {
        None
    } else {
        Some(v)
    }
}

/// Parses the structured decision answer. Missing targets for actions aimed
/// at the conversation default to the focal post; anything else malformed is
/// an error so the caller can reprompt.
pub fn parse_decision(
    response: &str,
    agent_id: u32,
    focal_post: &str,
) -> Result<DecisionOutcome, DecisionParseError> {
    let action_raw =
        field_value(response, "ACTION").ok_or(DecisionParseError::MissingField("ACTION"))?;
    let kind =
        ActionKind::parse(&action_raw).ok_or(DecisionParseError::BadAction(action_raw))?;
    let opinion_raw =
        field_value(response, "OPINION").ok_or(DecisionParseError::MissingField("OPINION"))?;
    let opinion: f64 = opinion_raw
        .parse()
        .map_err(|_| DecisionParseError::BadOpinion(opinion_raw.clone()))?;
    if opinion.is_nan() {
        return Err(DecisionParseError::BadOpinion(opinion_raw));
    }
    let opinion = opinion.clamp(0.0, 10.0);

    let mut target = optional(field_value(response, "TARGET"));
    let mut content = optional(field_value(response, "CONTENT"));
    match kind {
        ActionKind::DoNothing => {
            target = None;
            content = None;
        }
        ActionKind::Like | ActionKind::Retweet => {
            content = None;
            target = target.or_else(|| Some(focal_post.to_string()));
        }
        ActionKind::Reply => {
            target = target.or_else(|| Some(focal_post.to_string()));
        }
        ActionKind::Post => {
            target = None;
        }
    }
    let action = AgentAction { agent_id, kind, target, content };
    action.validate()?;
    Ok(DecisionOutcome { action, opinion })
}

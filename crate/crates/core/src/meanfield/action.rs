//! Agent actions and their rendering as plain sentences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Post,
    Retweet,
    Reply,
    Like,
    DoNothing,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Post,
        ActionKind::Retweet,
        ActionKind::Reply,
        ActionKind::Like,
        ActionKind::DoNothing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Post => "post",
            ActionKind::Retweet => "retweet",
            ActionKind::Reply => "reply",
            ActionKind::Like => "like",
            ActionKind::DoNothing => "do_nothing",
        }
    }

    pub fn parse(s: &str) -> Option<ActionKind> {
        match s.trim().to_lowercase().replace([' ', '-'], "_").as_str() {
            "post" => Some(ActionKind::Post),
            "retweet" => Some(ActionKind::Retweet),
            "reply" => Some(ActionKind::Reply),
            "like" => Some(ActionKind::Like),
            "do_nothing" | "nothing" | "none" => Some(ActionKind::DoNothing),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ActionError {
    #[error("{kind:?} requires a target post")]
    MissingTarget { kind: ActionKind },
    #[error("{kind:?} requires non-empty content")]
    MissingContent { kind: ActionKind },
    #[error("{kind:?} must not carry {field}")]
    UnexpectedField { kind: ActionKind, field: &'static str },
    #[error("agent id {agent} out of range for {n} names")]
    UnknownAgent { agent: u32, n: usize },
}

/// One concrete act by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub agent_id: u32,
    pub kind: ActionKind,
    /// Post id the action refers to; required for retweet, reply, like.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Body text; required for post and reply.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
}

impl AgentAction {
    pub fn validate(&self) -> Result<(), ActionError> {
        let need_target = matches!(self.kind, ActionKind::Retweet | ActionKind::Reply | ActionKind::Like);
        let need_content = matches!(self.kind, ActionKind::Post | ActionKind::Reply);
        if need_target && self.target.as_deref().is_none_or(|t| t.trim().is_empty()) {
            return Err(ActionError::MissingTarget { kind: self.kind });
        }
        if need_content && self.content.as_deref().is_none_or(|c| c.trim().is_empty()) {
            return Err(ActionError::MissingContent { kind: self.kind });
        }
        match self.kind {
            ActionKind::DoNothing => {
                if self.target.is_some() {
                    return Err(ActionError::UnexpectedField { kind: self.kind, field: "a target" });
                }
                if self.content.is_some() {
                    return Err(ActionError::UnexpectedField { kind: self.kind, field: "content" });
                }
            }
            ActionKind::Like | ActionKind::Retweet => {
                if self.content.is_some() {
                    return Err(ActionError::UnexpectedField { kind: self.kind, field: "content" });
                }
            }
            ActionKind::Post => {
                if self.target.is_some() {
                    return Err(ActionError::UnexpectedField { kind: self.kind, field: "a target" });
                }
            }
            ActionKind::Reply => {}
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.kind == ActionKind::DoNothing
    }
}

/// Renders a validated action as one sentence, e.g.
/// "Maya Sato replied to post p1: great route". Silent agents produce no
/// sentence and are not fed to the summarizer.
pub fn textualize_action(action: &AgentAction, names: &[String]) -> Result<String, ActionError> {
    action.validate()?;
    let name = names
        .get(action.agent_id as usize)
        .ok_or(ActionError::UnknownAgent { agent: action.agent_id, n: names.len() })?;
    let target = action.target.as_deref().unwrap_or_default();
    let content = action.content.as_deref().unwrap_or_default();
    Ok(match action.kind {
        ActionKind::Post => format!("{name} posted: {content}"),
        ActionKind::Retweet => format!("{name} retweeted post {target}"),
        ActionKind::Reply => format!("{name} replied to post {target}: {content}"),
        ActionKind::Like => format!("{name} liked post {target}"),
        ActionKind::DoNothing => format!("{name} did nothing"),
    })
}

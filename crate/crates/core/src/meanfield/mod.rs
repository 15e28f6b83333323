//! Textual mean field: agent actions rendered as short factual sentences,
//! folded into one running summary by the backend. The summary plus the
//! numeric mean is what every agent sees instead of its raw neighborhood.

mod action;
mod summary;

pub use action::{textualize_action, ActionError, ActionKind, AgentAction};
pub use summary::{summarize_mean_field, TextMeanFieldState, NO_ACTIVITY_SUMMARY};

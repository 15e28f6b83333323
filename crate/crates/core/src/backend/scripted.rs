//! Rule-based responder: a pure function of the request text. It recognizes
//! the three prompt families by their format markers and answers decisions
//! from interest overlap, so runs are reproducible without any model.

use std::collections::BTreeSet;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::config::SimConfig;
use crate::util::text::tokenize;

/// Knobs of the scripted decision rule. Opinion is
/// min(base + per_overlap * shared_tokens, cap); the action falls out of the
/// opinion via descending thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedPolicy {
    pub base_opinion: f64,
    pub opinion_per_overlap: f64,
    pub opinion_cap: f64,
    pub like_threshold: f64,
    pub retweet_threshold: f64,
    pub reply_threshold: f64,
}

impl Default for ScriptedPolicy {
    fn default() -> Self {
        ScriptedPolicy {
            base_opinion: 2.0,
            opinion_per_overlap: 2.5,
            opinion_cap: 10.0,
            like_threshold: 8.0,
            retweet_threshold: 6.0,
            reply_threshold: 4.0,
        }
    }
}

impl ScriptedPolicy {
    pub fn from_config(cfg: &SimConfig) -> Self {
        ScriptedPolicy {
            base_opinion: cfg.scripted_base_opinion,
            opinion_per_overlap: cfg.scripted_opinion_per_overlap,
            opinion_cap: cfg.scripted_opinion_cap,
            like_threshold: cfg.scripted_like_threshold,
            retweet_threshold: cfg.scripted_retweet_threshold,
            reply_threshold: cfg.scripted_reply_threshold,
        }
    }
}

pub struct ScriptedBackend {
    policy: ScriptedPolicy,
}

impl ScriptedBackend {
    pub fn new(policy: ScriptedPolicy) -> Self {
        ScriptedBackend { policy }
    }

    fn respond(&self, prompt: &str) -> String {
        if prompt.contains("SCORE:") {
            self.predict(prompt)
        } else if prompt.contains("ACTION:") {
            self.decide(prompt)
        } else {
            summarize(prompt)
        }
    }

    fn decide(&self, prompt: &str) -> String {
        let interests: BTreeSet<String> = prompt
            .lines()
            .find_map(|l| l.strip_prefix("Your interests: "))
            .map(|rest| tokenize(rest).into_iter().collect())
            .unwrap_or_default();
        // The focal post line starts the line; memory echoes of it are
        // indented under "- [step ...]".
        let (post_id, post_text) = prompt
            .lines()
            .find_map(|l| {
                let rest = l.strip_prefix("Post ")?;
                rest.split_once(": ")
            })
            .unwrap_or(("unknown", ""));

        let mut first_shared: Option<String> = None;
        let mut shared = BTreeSet::new();
        for tok in tokenize(post_text) {
            if interests.contains(&tok) && shared.insert(tok.clone()) && first_shared.is_none() {
                first_shared = Some(tok);
            }
        }
        let p = &self.policy;
        let opinion = (p.base_opinion + p.opinion_per_overlap * shared.len() as f64)
            .min(p.opinion_cap)
            .clamp(0.0, 10.0);
        let (action, target, content) = if opinion >= p.like_threshold {
            ("like", post_id.to_string(), "none".to_string())
        } else if opinion >= p.retweet_threshold {
            ("retweet", post_id.to_string(), "none".to_string())
        } else if opinion >= p.reply_threshold {
            let theme = first_shared.unwrap_or_else(|| "post".to_string());
            ("reply", post_id.to_string(), format!("Really feeling the {theme} angle here."))
        } else {
            ("do_nothing", "none".to_string(), "none".to_string())
        };
        format!(
            "ACTION: {action}\nTARGET: {target}\nCONTENT: {content}\nOPINION: {}",
            format_opinion(opinion)
        )
    }

    fn predict(&self, prompt: &str) -> String {
        let mean = number_after(prompt, "final mean opinion ").unwrap_or(5.0);
        let scale = prompt.find("On a scale from ").map(|i| &prompt[i..]).unwrap_or(prompt);
        let lo = number_after(scale, "from ").unwrap_or(0.0);
        let hi = number_after(scale, " to ").unwrap_or(10.0);
        let score = lo + (mean / 10.0) * (hi - lo);
        format!("SCORE: {score:.4}")
    }
}

fn summarize(prompt: &str) -> String {
    let section = prompt.split("New agent actions this step:").nth(1).unwrap_or("");
    let actions: Vec<&str> =
        section.lines().map(str::trim_start).filter(|l| l.starts_with("- ")).collect();
    let count_kind = |verb: &str| actions.iter().filter(|l| l.contains(verb)).count();
    let likes = count_kind(" liked ");
    let replies = count_kind(" replied ");
    let retweets = count_kind(" retweeted ");
    let posts = count_kind(" posted ");
    let n = actions.len();
    let level = match n {
        0 => "quiet",
        1..=3 => "modest",
        4..=10 => "active",
        _ => "surging",
    };
    format!(
        "Observed {n} action{} this step ({likes} likes, {replies} replies, {retweets} retweets, \
         {posts} new posts); attention is {level}.",
        if n == 1 { "" } else { "s" }
    )
}

/// Integral opinions print without a decimal point ("9", not "9.0").
fn format_opinion(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

/// First number following `marker`, if any.
fn number_after(text: &str, marker: &str) -> Option<f64> {
    let rest = &text[text.find(marker)? + marker.len()..];
    let rest = rest.trim_start();
    let end = rest
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || *c == '.' || *c == '-' || *c == '+'))
        .map(|(i, _)| i)
        .unwrap_or(rest.len());
    rest[..end].parse().ok()
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let prompt: String = request
            .messages
            .iter()
            .filter(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        Ok(ChatResponse { text: self.respond(&prompt), prompt_tokens: None, completion_tokens: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CallSite, ChatMessage};

    fn ask(backend: &ScriptedBackend, prompt: &str) -> String {
        let req = ChatRequest {
            site: CallSite::Decision,
            model: "scripted-v1".into(),
            temperature: 1.0,
            messages: vec![ChatMessage::user(prompt)],
        };
        backend.complete(&req).unwrap().text
    }

    fn overlap_likes_policy() -> ScriptedPolicy {
        // Any overlap saturates at opinion 9 and likes the post.
        ScriptedPolicy {
            base_opinion: 0.0,
            opinion_per_overlap: 9.0,
            opinion_cap: 9.0,
            like_threshold: 9.0,
            retweet_threshold: 9.0,
            reply_threshold: 9.0,
        }
    }

    #[test]
    fn overlapping_interests_produce_the_expected_like() {
        let backend = ScriptedBackend::new(overlap_likes_policy());
        let prompt = "Your interests: hiking, jazz.\nPost p1: a jazz night downtown\n\nACTION:";
        assert_eq!(ask(&backend, prompt), "ACTION: like\nTARGET: p1\nCONTENT: none\nOPINION: 9");
    }

    #[test]
    fn no_overlap_stays_silent() {
        let backend = ScriptedBackend::new(overlap_likes_policy());
        let prompt = "Your interests: hiking, jazz.\nPost p1: quarterly earnings\n\nACTION:";
        assert_eq!(
            ask(&backend, prompt),
            "ACTION: do_nothing\nTARGET: none\nCONTENT: none\nOPINION: 0"
        );
    }

    #[test]
    fn default_policy_scales_actions_with_overlap() {
        let backend = ScriptedBackend::new(ScriptedPolicy::default());
        // One shared token: opinion 4.5 -> reply mentioning the shared theme.
        let prompt = "Your interests: hiking, jazz.\nPost p9: jazz brunch\n\nACTION:";
        let text = ask(&backend, prompt);
        assert_eq!(
            text,
            "ACTION: reply\nTARGET: p9\nCONTENT: Really feeling the jazz angle here.\nOPINION: 4.5"
        );
        // Three shared tokens: opinion 9.5 -> like.
        let prompt =
            "Your interests: hiking, jazz, chess.\nPost p9: hiking then jazz then chess\n\nACTION:";
        assert!(ask(&backend, prompt).starts_with("ACTION: like\nTARGET: p9"));
    }

    #[test]
    fn same_request_same_response() {
        let backend = ScriptedBackend::new(ScriptedPolicy::default());
        let prompt = "Your interests: chess.\nPost p2: speed chess openings\n\nACTION:";
        assert_eq!(ask(&backend, prompt), ask(&backend, prompt));
    }

    #[test]
    fn summaries_count_actions_by_kind() {
        let backend = ScriptedBackend::new(ScriptedPolicy::default());
        let prompt = "Previous summary: (none)\nNew agent actions this step:\n\
                      - Maya Sato liked post p1\n\
                      - Omar Weiss replied to post p1: nice view\n\
                      - Rosa Xu retweeted post p1\n\nWrite an updated summary.";
        let text = ask(&backend, prompt);
        assert!(text.contains("3 actions"), "{text}");
        assert!(text.contains("1 likes") && text.contains("1 replies") && text.contains("1 retweets"));
    }

    #[test]
    fn prediction_maps_mean_opinion_onto_label_scale() {
        let backend = ScriptedBackend::new(ScriptedPolicy::default());
        let prompt = "The propagation reached a final mean opinion 8.0 out of 10.\n\
                      On a scale from 0 to 16, estimate the post's eventual popularity score.\n\
                      Reply with exactly one line:\nSCORE: <number>";
        assert_eq!(ask(&backend, prompt), "SCORE: 12.8000");
    }
}

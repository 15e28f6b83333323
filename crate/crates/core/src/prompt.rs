//! Prompt templates. Packaged defaults are embedded at build time; a config
//! can point at a directory of replacement files with the same names and
//! placeholders.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot read prompt file {path}: {message}")]
    Io { path: String, message: String },
    #[error("prompt `{name}` is missing required placeholder {placeholder}")]
    MissingPlaceholder { name: &'static str, placeholder: &'static str },
}

/// The five templates the pipeline uses, with per-template placeholder
/// contracts checked at load time.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub decision: String,
    pub summarize: String,
    pub predict: String,
    pub reprompt_decision: String,
    pub reprompt_predict: String,
}

const FILES: [(&str, &[&str]); 5] = [
    (
        "decision.txt",
        &[
            "{name}", "{gender}", "{occupation}", "{interests}", "{personality}", "{post_id}",
            "{opinion}", "{post_text}", "{image_line}", "{memory}", "{context}",
        ],
    ),
    ("summarize.txt", &["{prev_summary}", "{actions}", "{ugc_text}"]),
    ("predict.txt", &["{enriched}", "{image_line}", "{label_min}", "{label_max}"]),
    ("reprompt_decision.txt", &[]),
    ("reprompt_predict.txt", &[]),
];

impl PromptSet {
    /// The templates compiled into the binary.
    pub fn packaged() -> PromptSet {
        PromptSet {
            decision: include_str!("../prompts/decision.txt").to_string(),
            summarize: include_str!("../prompts/summarize.txt").to_string(),
            predict: include_str!("../prompts/predict.txt").to_string(),
            reprompt_decision: include_str!("../prompts/reprompt_decision.txt").to_string(),
            reprompt_predict: include_str!("../prompts/reprompt_predict.txt").to_string(),
        }
    }

    /// Loads overrides from `dir`; empty dir name means packaged defaults.
    /// All five files must exist and carry their placeholders.
    pub fn load(dir: &str) -> Result<PromptSet, PromptError> {
        let set = if dir.is_empty() {
            PromptSet::packaged()
        } else {
            let dir = Path::new(dir);
            let read = |file: &str| -> Result<String, PromptError> {
                let path = dir.join(file);
                std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            };
            PromptSet {
                decision: read("decision.txt")?,
                summarize: read("summarize.txt")?,
                predict: read("predict.txt")?,
                reprompt_decision: read("reprompt_decision.txt")?,
                reprompt_predict: read("reprompt_predict.txt")?,
            }
        };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<(), PromptError> {
        for (file, placeholders) in FILES {
            let (name, text): (&'static str, &str) = match file {
                "decision.txt" => ("decision", &self.decision),
                "summarize.txt" => ("summarize", &self.summarize),
                "predict.txt" => ("predict", &self.predict),
                "reprompt_decision.txt" => ("reprompt_decision", &self.reprompt_decision),
                _ => ("reprompt_predict", &self.reprompt_predict),
            };
            for ph in placeholders {
                if !text.contains(ph) {
                    return Err(PromptError::MissingPlaceholder { name, placeholder: ph });
                }
            }
        }
        Ok(())
    }
}

/// Replaces `{key}` placeholders. Unknown placeholders are left intact so a
/// template typo shows up verbatim in the output instead of vanishing.
pub fn fill(template: &str, values: &HashMap<&str, String>) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packaged_templates_pass_placeholder_check() {
        PromptSet::load("").unwrap();
    }

    #[test]
    fn fill_replaces_all_occurrences() {
        let vals = HashMap::from([("post_id", "p7".to_string())]);
        assert_eq!(fill("{post_id} then {post_id}", &vals), "p7 then p7");
    }

    #[test]
    fn override_dir_must_have_all_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("decision.txt"), "x").unwrap();
        let err = PromptSet::load(dir.path().to_str().unwrap()).unwrap_err();
        assert!(matches!(err, PromptError::Io { .. }));
    }

    #[test]
    fn override_missing_placeholder_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let packaged = PromptSet::packaged();
        std::fs::write(dir.path().join("decision.txt"), &packaged.decision).unwrap();
        std::fs::write(dir.path().join("summarize.txt"), "no placeholders here").unwrap();
        std::fs::write(dir.path().join("predict.txt"), &packaged.predict).unwrap();
        std::fs::write(dir.path().join("reprompt_decision.txt"), &packaged.reprompt_decision).unwrap();
        std::fs::write(dir.path().join("reprompt_predict.txt"), &packaged.reprompt_predict).unwrap();
        match PromptSet::load(dir.path().to_str().unwrap()).unwrap_err() {
            PromptError::MissingPlaceholder { name, placeholder } => {
                assert_eq!(name, "summarize");
                assert_eq!(placeholder, "{prev_summary}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decision_template_lists_every_action_kind() {
        let set = PromptSet::packaged();
        let menu_line = set
            .decision
            .lines()
            .find(|l| l.contains("available actions are:"))
            .expect("menu line present");
        for kind in ["post", "retweet", "reply", "like", "do_nothing"] {
            assert!(menu_line.contains(kind), "menu missing {kind}");
        }
    }
}

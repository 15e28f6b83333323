//! Metadata enrichment: post fields and propagation outcomes rendered as
//! prose, in authored order, under a versioned key-to-template map.

use serde::Deserialize;
use std::path::Path;

use super::PredictError;
use crate::runtime::{PropagationFeatures, UgcPost};

#[derive(Debug, Clone, Deserialize)]
pub struct FieldMap {
    pub version: String,
    #[serde(rename = "field")]
    pub fields: Vec<FieldRule>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FieldRule {
    pub key: String,
    /// Sentence with a `{v}` placeholder for the value.
    pub template: String,
}

const FIELD_MAP_TOML: &str = include_str!("../../data/field_map.toml");

impl FieldMap {
    pub fn packaged() -> &'static FieldMap {
        static MAP: std::sync::OnceLock<FieldMap> = std::sync::OnceLock::new();
        MAP.get_or_init(|| toml::from_str(FIELD_MAP_TOML).expect("packaged field map parses"))
    }

    /// Loads a replacement map; an empty path means the packaged one.
    pub fn load(path: &str) -> Result<FieldMap, PredictError> {
        if path.is_empty() {
            return Ok(FieldMap::packaged().clone());
        }
        let raw = std::fs::read_to_string(Path::new(path)).map_err(|e| PredictError::Io {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        let map: FieldMap = toml::from_str(&raw).map_err(|e| PredictError::Format {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        for rule in &map.fields {
            if !rule.template.contains("{v}") {
                return Err(PredictError::Format {
                    path: path.to_string(),
                    message: format!("template for key {} lacks {{v}}", rule.key),
                });
            }
        }
        Ok(map)
    }

    fn template_for(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|r| r.key == key).map(|r| r.template.as_str())
    }
}

/// Post text with metadata and simulation outcomes folded in, plus the map
/// version that shaped it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrichedText {
    pub text: String,
    pub field_map_version: String,
}

fn render_value(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(items) => {
            items.iter().map(render_value).collect::<Vec<_>>().join(", ")
        }
        other => other.to_string(),
    }
}

fn feature_sentences(features: &PropagationFeatures) -> String {
    let series = features
        .m_num_series
        .iter()
        .map(|m| format!("{m:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    let final_m = features.m_num_series.last().copied().unwrap_or(0.0);
    let mut block = format!(
        "Simulated opinion trajectory: {series}; final mean opinion {final_m:.2}; \
         {:.1}% of simulated users strongly engaged.",
        features.share_above_7_5 * 100.0,
    );
    let h = &features.action_histogram;
    block.push_str(&format!(
        "\nSimulated audience actions: {} posts, {} retweets, {} replies, {} likes.",
        h.post, h.retweet, h.reply, h.like,
    ));
    if !features.final_summary.is_empty() {
        block.push_str(&format!("\nPropagation summary: {}", features.final_summary));
    }
    block
}

/// Folds metadata into prose, one sentence per field, in the order the
/// fields appear on the post, then appends the propagation outcome when a
/// simulation has run. Unknown keys get a generic sentence rather than
/// being dropped.
pub fn aggregate_metadata(
    post: &UgcPost,
    features: Option<&PropagationFeatures>,
    map: &FieldMap,
) -> EnrichedText {
    let mut text = format!("Post {}: {}", post.id, post.text);
    for (key, value) in &post.metadata {
        let rendered = render_value(value);
        let sentence = match map.template_for(key) {
            Some(template) => template.replace("{v}", &rendered),
            None => {
                log::warn!("no field template for metadata key {key}, using fallback");
                format!("Its {key} is {rendered}.")
            }
        };
        text.push('\n');
        text.push_str(&sentence);
    }
    if let Some(f) = features {
        text.push('\n');
        text.push_str(&feature_sentences(f));
    }
    EnrichedText { text, field_map_version: map.version.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::ActionHistogram;
    use serde_json::json;

    fn post() -> UgcPost {
        let mut p = UgcPost::new("p1", "sunrise over the ridge");
        p.metadata.insert("Category".into(), json!("outdoors"));
        p.metadata.insert("AuthorFollowers".into(), json!(1520));
        p.metadata.insert("Mood".into(), json!("calm"));
        p.metadata.insert("Tags".into(), json!(["hiking", "dawn"]));
        p
    }

    fn features() -> PropagationFeatures {
        PropagationFeatures {
            m_num_series: vec![0.5, 4.0, 8.1],
            final_summary: "strong engagement".into(),
            action_histogram: ActionHistogram {
                post: 1,
                retweet: 2,
                reply: 3,
                like: 4,
                do_nothing: 5,
            },
            share_above_7_5: 0.22,
        }
    }

    #[test]
    fn known_keys_use_their_templates_in_authored_order() {
        let enriched = aggregate_metadata(&post(), None, FieldMap::packaged());
        let expected = "Post p1: sunrise over the ridge\n\
                        The post belongs to the category 'outdoors'.\n\
                        The author has 1520 followers.\n\
                        Its Mood is calm.\n\
                        It is tagged with: hiking, dawn.";
        assert_eq!(enriched.text, expected);
        assert_eq!(enriched.field_map_version, "fieldmap-v1");
    }

    #[test]
    fn category_and_tags_render_like_the_shipped_map_promises() {
        let mut p = UgcPost::new("p9", "a cat video");
        p.metadata.insert("Category".into(), json!("Animal"));
        p.metadata.insert("Tags".into(), json!(["cat", "cute"]));
        let text = aggregate_metadata(&p, None, FieldMap::packaged()).text;
        assert!(text.contains("category 'Animal'"), "{text}");
        assert!(text.contains("tagged with: cat, cute"), "{text}");
    }

    #[test]
    fn propagation_features_become_sentences() {
        let enriched = aggregate_metadata(&post(), Some(&features()), FieldMap::packaged());
        assert!(
            enriched.text.contains("Simulated opinion trajectory: 0.50, 4.00, 8.10"),
            "{}",
            enriched.text
        );
        assert!(enriched.text.contains("final mean opinion 8.10"));
        assert!(enriched.text.contains("22.0% of simulated users strongly engaged"));
        assert!(enriched.text.contains("1 posts, 2 retweets, 3 replies, 4 likes"));
        assert!(enriched.text.contains("Propagation summary: strong engagement"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = aggregate_metadata(&post(), Some(&features()), FieldMap::packaged());
        let b = aggregate_metadata(&post(), Some(&features()), FieldMap::packaged());
        assert_eq!(a, b);
    }

    #[test]
    fn no_metadata_is_just_the_post_line() {
        let p = UgcPost::new("p2", "hello");
        let enriched = aggregate_metadata(&p, None, FieldMap::packaged());
        assert_eq!(enriched.text, "Post p2: hello");
    }

    #[test]
    fn bad_override_template_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fm.toml");
        std::fs::write(&path, "version = \"x\"\n[[field]]\nkey = \"K\"\ntemplate = \"no slot\"\n")
            .unwrap();
        let err = FieldMap::load(path.to_str().unwrap()).unwrap_err();
        assert!(err.to_string().contains("lacks"), "{err}");
    }

    #[test]
    fn empty_path_means_the_packaged_map() {
        let map = FieldMap::load("").unwrap();
        assert_eq!(map.version, FieldMap::packaged().version);
    }
}

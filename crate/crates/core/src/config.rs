//! Run configuration: a flat TOML file with full defaults, validated up
//! front, and digested so artifacts can be matched to the exact settings
//! that produced them.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

use crate::util::digest::sha256_hex;

/// What the agent decision prompts carry as social context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Compressed context: numerical mean opinion plus a running textual
    /// summary of the propagation, refreshed once per step.
    Smf,
    /// Uncompressed context: every neighbor's profile, stance and full
    /// action history is embedded in each decision prompt.
    Standard,
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimMode::Smf => write!(f, "smf"),
            SimMode::Standard => write!(f, "standard"),
        }
    }
}

/// Which chat backend serves agent decisions, summaries and predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Deterministic rule-based responder, no network.
    Scripted,
    /// Chat-completions endpoint over HTTP.
    Http,
    /// Serve every request from the response cache; miss is an error.
    Replay,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

/// Flat run configuration. Every field has a default, so an empty file is a
/// valid config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub mode: SimMode,
    pub n_agents: u32,
    pub rounds: u32,

    // Opinion dynamics.
    pub epsilon: f64,
    pub alpha_active: f64,
    pub alpha_inactive: f64,

    // Participation classes: fractions must sum to 1, base activation rates
    // are per-step Bernoulli probabilities before interest scaling.
    pub split_lurker: f64,
    pub split_contributor: f64,
    pub split_creator: f64,
    pub activation_lurker: f64,
    pub activation_contributor: f64,
    pub activation_creator: f64,

    // Follow graph: preferential attachment, `attach_m` mutual edges per
    // incoming node.
    pub attach_m: u32,

    pub memory_capacity: usize,
    pub summary_cap_chars: usize,
    pub concurrency_limit: usize,

    // Backend.
    pub backend: BackendKind,
    pub model: String,
    pub temperature: f64,
    pub base_url: String,
    pub auth_env: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub cache_dir: String,

    // Scripted policy: opinion = min(base + per_overlap * |shared tokens|, cap),
    // action picked by descending thresholds.
    pub scripted_base_opinion: f64,
    pub scripted_opinion_per_overlap: f64,
    pub scripted_opinion_cap: f64,
    pub scripted_like_threshold: f64,
    pub scripted_retweet_threshold: f64,
    pub scripted_reply_threshold: f64,

    // Prediction.
    pub label_min: f64,
    pub label_max: f64,
    pub ridge_lambda: f64,

    // Optional overrides for packaged assets; empty means embedded defaults.
    pub prompts_dir: String,
    pub field_map_path: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            mode: SimMode::Smf,
            n_agents: 200,
            rounds: 6,
            epsilon: 6.0,
            alpha_active: 0.8,
            alpha_inactive: 0.2,
            split_lurker: 0.90,
            split_contributor: 0.09,
            split_creator: 0.01,
            activation_lurker: 0.05,
            activation_contributor: 0.30,
            activation_creator: 0.80,
            attach_m: 3,
            memory_capacity: 20,
            summary_cap_chars: 800,
            concurrency_limit: 4,
            backend: BackendKind::Scripted,
            model: "scripted-v1".to_string(),
            temperature: 1.0,
            base_url: String::new(),
            auth_env: "UGCSIM_API_KEY".to_string(),
            max_retries: 3,
            initial_backoff_ms: 200,
            cache_dir: String::new(),
            scripted_base_opinion: 2.0,
            scripted_opinion_per_overlap: 2.5,
            scripted_opinion_cap: 10.0,
            scripted_like_threshold: 8.0,
            scripted_retweet_threshold: 6.0,
            scripted_reply_threshold: 4.0,
            label_min: 0.0,
            label_max: 16.0,
            ridge_lambda: 1.0,
            prompts_dir: String::new(),
            field_map_path: String::new(),
        }
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<SimConfig, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: SimConfig = toml::from_str(&raw).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks ranges and cross-field constraints; returns all violations at
    /// once so a bad file can be fixed in one pass.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(format!("  - {msg}"));
            }
        };

        check(self.n_agents > 0, format!("n_agents must be positive, got {}", self.n_agents));
        check(self.rounds > 0, format!("rounds must be positive, got {}", self.rounds));
        check(
            self.epsilon >= 0.0 && self.epsilon.is_finite(),
            format!("epsilon must be a finite non-negative number, got {}", self.epsilon),
        );
        for (name, v) in [
            ("alpha_active", self.alpha_active),
            ("alpha_inactive", self.alpha_inactive),
        ] {
            check((0.0..=1.0).contains(&v), format!("{name} must lie in [0, 1], got {v}"));
        }
        let split_sum = self.split_lurker + self.split_contributor + self.split_creator;
        check(
            (split_sum - 1.0).abs() <= 1e-9,
            format!("class splits must sum to 1, got {split_sum}"),
        );
        for (name, v) in [
            ("split_lurker", self.split_lurker),
            ("split_contributor", self.split_contributor),
            ("split_creator", self.split_creator),
            ("activation_lurker", self.activation_lurker),
            ("activation_contributor", self.activation_contributor),
            ("activation_creator", self.activation_creator),
        ] {
            check((0.0..=1.0).contains(&v), format!("{name} must lie in [0, 1], got {v}"));
        }
        check(self.attach_m > 0, format!("attach_m must be positive, got {}", self.attach_m));
        check(
            self.n_agents > self.attach_m,
            format!(
                "n_agents must exceed attach_m, got n_agents={} attach_m={}",
                self.n_agents, self.attach_m
            ),
        );
        check(
            self.memory_capacity > 0,
            format!("memory_capacity must be positive, got {}", self.memory_capacity),
        );
        check(
            self.summary_cap_chars > 0,
            format!("summary_cap_chars must be positive, got {}", self.summary_cap_chars),
        );
        check(
            self.concurrency_limit > 0,
            format!("concurrency_limit must be positive, got {}", self.concurrency_limit),
        );
        check(
            self.temperature >= 0.0 && self.temperature.is_finite(),
            format!("temperature must be a finite non-negative number, got {}", self.temperature),
        );
        if self.backend == BackendKind::Http {
            check(!self.base_url.is_empty(), "base_url is required for the http backend".to_string());
        }
        if self.backend == BackendKind::Replay {
            check(!self.cache_dir.is_empty(), "cache_dir is required for the replay backend".to_string());
        }
        check(
            self.label_max > self.label_min,
            format!(
                "label_max must exceed label_min, got [{}, {}]",
                self.label_min, self.label_max
            ),
        );
        check(
            self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite(),
            format!("ridge_lambda must be a finite non-negative number, got {}", self.ridge_lambda),
        );

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    /// SHA-256 over the canonical JSON form of the resolved config. Stamped
    /// into every artifact header this run produces.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }
}

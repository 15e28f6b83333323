//! Numerical opinion dynamics on the follow graph: bounded-confidence
//! averaging with per-neighbor influence weights, plus interest-driven
//! activation sampling.

mod activation;
mod step;

pub use activation::{
    activation_probability, activation_profile, activation_profile_seq, bernoulli_draw,
    interest_bag, sample_activated,
};
pub use step::{
    deffuant_step, deffuant_step_among, deffuant_step_among_seq, deffuant_step_seq,
    influence_set, numeric_mean_field,
};

use thiserror::Error;

/// Opinions indexed by agent id, each in [0, 10].
pub type OpinionVector = Vec<f64>;

pub const OPINION_MIN: f64 = 0.0;
pub const OPINION_MAX: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("opinion vector is empty")]
    EmptyOpinions,
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, got: usize, expected: usize },
}

/// Parameters of one update step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    /// Confidence bound: neighbor j is heard only if |o_j - o_i| < epsilon.
    pub epsilon: f64,
    /// Influence weight of an agent that acted this step.
    pub alpha_active: f64,
    /// Influence weight of a silent agent.
    pub alpha_inactive: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig { epsilon: 6.0, alpha_active: 0.8, alpha_inactive: 0.2 }
    }
}

//! Interest-gated activation: each step every agent flips a Bernoulli coin
//! whose bias is its class base rate scaled by how much the post overlaps
//! its interests. Draws are keyed by (seed, step, agent), so sampling order
//! is irrelevant.

use std::collections::HashMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::util::rng::{mix, unit_f64};
use crate::util::text::{cosine, token_bag};

/// Token bag of an agent's interest tags.
pub fn interest_bag(tags: &[String]) -> HashMap<String, u32> {
    token_bag(tags.iter().map(|t| t.as_str()))
}

/// Per-step activation probability: base * (0.5 + cosine similarity),
/// clamped to [0, 1]. A fully aligned post activates at 1.5x the base rate;
/// an unrelated one at half.
pub fn activation_probability(
    base: f64,
    interests: &HashMap<String, u32>,
    post: &HashMap<String, u32>,
) -> f64 {
    (base * (0.5 + cosine(interests, post))).clamp(0.0, 1.0)
}

/// Activation probabilities for the whole roster. Constant across steps for
/// a fixed post, so callers compute it once per run.
pub fn activation_profile(
    bases: &[f64],
    interests: &[HashMap<String, u32>],
    post: &HashMap<String, u32>,
) -> Vec<f64> {
    assert_eq!(bases.len(), interests.len());
    #[cfg(feature = "parallel")]
    {
        bases
            .par_iter()
            .zip(interests.par_iter())
            .map(|(&b, bag)| activation_probability(b, bag, post))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        activation_profile_seq(bases, interests, post)
    }
}

/// Sequential reference path for [`activation_profile`].
pub fn activation_profile_seq(
    bases: &[f64],
    interests: &[HashMap<String, u32>],
    post: &HashMap<String, u32>,
) -> Vec<f64> {
    assert_eq!(bases.len(), interests.len());
    bases
        .iter()
        .zip(interests)
        .map(|(&b, bag)| activation_probability(b, bag, post))
        .collect()
}

/// One counter-keyed Bernoulli draw.
pub fn bernoulli_draw(seed: u64, step: u32, agent: u32, p: f64) -> bool {
    unit_f64(mix(&[seed, step as u64, agent as u64])) < p
}

/// Draws the activation set for one step.
pub fn sample_activated(probs: &[f64], seed: u64, step: u32) -> Vec<bool> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| bernoulli_draw(seed, step, i as u32, p))
        .collect()
}

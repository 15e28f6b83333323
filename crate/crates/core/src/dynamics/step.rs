//! Synchronous bounded-confidence update. All agents read the same opinion
//! snapshot; update order cannot matter, which is what lets the parallel
//! path promise bit-identical results to the sequential one.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{DynamicsError, OpinionVector, DynamicsConfig, OPINION_MAX, OPINION_MIN};
use crate::population::SocialGraph;

/// Neighbors of `agent` whose opinion lies strictly within `epsilon`.
/// Sources are the agents `agent` follows.
///
/// Panics if `agent` or the graph ids exceed the opinion vector, mirroring
/// slice indexing.
pub fn influence_set(agent: u32, opinions: &[f64], graph: &SocialGraph, epsilon: f64) -> Vec<u32> {
    let o_i = opinions[agent as usize];
    graph
        .following(agent)
        .iter()
        .copied()
        .filter(|&j| (opinions[j as usize] - o_i).abs() < epsilon)
        .collect()
}

fn check_lengths(opinions: &[f64], graph: &SocialGraph, weights: &[f64]) -> Result<(), DynamicsError> {
    let n = graph.len() as usize;
    if opinions.len() != n {
        return Err(DynamicsError::LengthMismatch { what: "opinions", got: opinions.len(), expected: n });
    }
    if weights.len() != n {
        return Err(DynamicsError::LengthMismatch { what: "weights", got: weights.len(), expected: n });
    }
    Ok(())
}

/// One agent's next opinion. Each neighbor term is divided by the influence
/// set size before accumulating, in ascending neighbor order; this exact
/// operation order is part of the contract (parallel == sequential bit for
/// bit).
fn next_opinion(
    i: usize,
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    epsilon: f64,
    participants: Option<&[bool]>,
) -> f64 {
    let o_i = opinions[i];
    if let Some(mask) = participants {
        if !mask[i] {
            return o_i;
        }
    }
    let heard = |j: u32| -> bool {
        if let Some(mask) = participants {
            if !mask[j as usize] {
                return false;
            }
        }
        (opinions[j as usize] - o_i).abs() < epsilon
    };
    let neighbors = graph.following(i as u32);
    let k = neighbors.iter().filter(|&&j| heard(j)).count();
    if k == 0 {
        return o_i;
    }
    let k = k as f64;
    let mut delta = 0.0;
    for &j in neighbors {
        if heard(j) {
            delta += weights[j as usize] * (opinions[j as usize] - o_i) / k;
        }
    }
    (o_i + delta).clamp(OPINION_MIN, OPINION_MAX)
}

fn step_impl(
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    cfg: &DynamicsConfig,
    participants: Option<&[bool]>,
    parallel: bool,
) -> Result<OpinionVector, DynamicsError> {
    check_lengths(opinions, graph, weights)?;
    if let Some(mask) = participants {
        if mask.len() != opinions.len() {
            return Err(DynamicsError::LengthMismatch {
                what: "participants",
                got: mask.len(),
                expected: opinions.len(),
            });
        }
    }
    let update = |i: usize| next_opinion(i, opinions, graph, weights, cfg.epsilon, participants);
    #[cfg(feature = "parallel")]
    if parallel {
        return Ok((0..opinions.len()).into_par_iter().map(update).collect());
    }
    let _ = parallel;
    Ok((0..opinions.len()).map(update).collect())
}

/// Synchronous update of every agent.
pub fn deffuant_step(
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    cfg: &DynamicsConfig,
) -> Result<OpinionVector, DynamicsError> {
    step_impl(opinions, graph, weights, cfg, None, true)
}

/// Synchronous update restricted to `participants`: only marked agents move,
/// and only marked agents are heard. Everyone else keeps their opinion
/// untouched and invisible, which is how unexposed agents stay at exactly 0.
pub fn deffuant_step_among(
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    cfg: &DynamicsConfig,
    participants: &[bool],
) -> Result<OpinionVector, DynamicsError> {
    step_impl(opinions, graph, weights, cfg, Some(participants), true)
}

/// Sequential reference path for [`deffuant_step`]; always compiled so the
/// parallel path can be checked against it.
pub fn deffuant_step_seq(
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    cfg: &DynamicsConfig,
) -> Result<OpinionVector, DynamicsError> {
    step_impl(opinions, graph, weights, cfg, None, false)
}

/// Sequential reference path for [`deffuant_step_among`].
pub fn deffuant_step_among_seq(
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    cfg: &DynamicsConfig,
    participants: &[bool],
) -> Result<OpinionVector, DynamicsError> {
    step_impl(opinions, graph, weights, cfg, Some(participants), false)
}

/// Mean opinion across the whole population.
pub fn numeric_mean_field(opinions: &[f64]) -> Result<f64, DynamicsError> {
    if opinions.is_empty() {
        return Err(DynamicsError::EmptyOpinions);
    }
    Ok(opinions.iter().sum::<f64>() / opinions.len() as f64)
}

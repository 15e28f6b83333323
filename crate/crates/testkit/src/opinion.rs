//! Brute-force bounded-confidence oracle. Materializes each influence set,
//! sums the weighted pulls, and divides once at the end; the main crate
//! divides per term, so matching results are not an artifact of shared
//! arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ugcsim_core::population::SocialGraph;

/// One synchronous update, the obvious way.
pub fn step_naive(
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    epsilon: f64,
) -> Vec<f64> {
    let mut next = Vec::with_capacity(opinions.len());
    for i in 0..opinions.len() {
        let o_i = opinions[i];
        let mut influencers = Vec::new();
        for &j in graph.following(i as u32) {
            if (opinions[j as usize] - o_i).abs() < epsilon {
                influencers.push(j as usize);
            }
        }
        if influencers.is_empty() {
            next.push(o_i);
            continue;
        }
        let mut pull = 0.0;
        for &j in &influencers {
            pull += weights[j] * (opinions[j] - o_i);
        }
        let moved = o_i + pull / influencers.len() as f64;
        next.push(moved.clamp(0.0, 10.0));
    }
    next
}

/// Runs the naive update for `steps` rounds.
pub fn run_naive(
    opinions: &[f64],
    graph: &SocialGraph,
    weights: &[f64],
    epsilon: f64,
    steps: u32,
) -> Vec<f64> {
    let mut cur = opinions.to_vec();
    for _ in 0..steps {
        cur = step_naive(&cur, graph, weights, epsilon);
    }
    cur
}

/// A randomized test instance: a directed graph on up to `max_n` agents
/// where everyone follows someone, opinions in [0, 10], and weights drawn
/// from the given set.
pub struct Instance {
    pub graph: SocialGraph,
    pub opinions: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn random_instance(seed: u64, max_n: usize, weight_choices: &[f64]) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n.max(2)) as u32;
    // Ring guarantees out-degree >= 1; extra random directed edges on top.
    let mut edges: Vec<(u32, u32)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let extra = rng.random_range(0..(n as usize * 3));
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    let graph = SocialGraph::from_edges(n, &edges).expect("ring keeps everyone connected");
    let opinions = (0..n).map(|_| rng.random_range(0.0..=10.0)).collect();
    let weights = (0..n)
        .map(|_| weight_choices[rng.random_range(0..weight_choices.len())])
        .collect();
    Instance { graph, opinions, weights }
}

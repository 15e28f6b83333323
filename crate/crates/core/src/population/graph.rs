//! Follow graph built by preferential attachment. Follows are mutual, so
//! the directed structure is a symmetric adjacency with a heavy-tailed
//! degree distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PopulationError;

/// Directed follower -> followee adjacency. `following[i]` is who agent `i`
/// follows (their feed sources); `followers[i]` is who sees what `i` does.
/// Both lists are kept sorted, without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    following: Vec<Vec<u32>>,
    followers: Vec<Vec<u32>>,
}

impl SocialGraph {
    /// Builds a graph from directed (follower, followee) pairs.
    pub fn from_edges(n: u32, edges: &[(u32, u32)]) -> Result<SocialGraph, PopulationError> {
        let mut following = vec![Vec::new(); n as usize];
        let mut followers = vec![Vec::new(); n as usize];
        for &(src, dst) in edges {
            if src >= n || dst >= n {
                return Err(PopulationError::EdgeOutOfRange { src, dst, n });
            }
            if src == dst {
                return Err(PopulationError::SelfLoop(src));
            }
            following[src as usize].push(dst);
            followers[dst as usize].push(src);
        }
        for list in following.iter_mut().chain(followers.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let graph = SocialGraph { following, followers };
        graph.check_min_out_degree()?;
        Ok(graph)
    }

    fn check_min_out_degree(&self) -> Result<(), PopulationError> {
        if self.len() < 2 {
            return Ok(()); // a single agent has nobody to follow
        }
        match self.following.iter().position(|f| f.is_empty()) {
            Some(id) => Err(PopulationError::Isolated(id as u32)),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> u32 {
        self.following.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.following.is_empty()
    }

    /// Agents `id` follows: the sources whose opinions and actions reach it.
    pub fn following(&self, id: u32) -> &[u32] {
        &self.following[id as usize]
    }

    /// Agents following `id`: who gets exposed when `id` retweets.
    pub fn followers(&self, id: u32) -> &[u32] {
        &self.followers[id as usize]
    }

    /// Directed edges (follower, followee), sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (src, targets) in self.following.iter().enumerate() {
            for &dst in targets {
                out.push((src as u32, dst));
            }
        }
        out
    }
}

/// Preferential attachment with mutual follows: a seed clique of
/// `attach_m + 1` agents, then each new agent follows `attach_m` distinct
/// existing agents sampled proportionally to current degree (and is
/// followed back). Requires `n > attach_m`.
pub fn generate_graph(n: u32, attach_m: u32, seed: u64) -> Result<SocialGraph, PopulationError> {
    if attach_m == 0 || n <= attach_m {
        return Err(PopulationError::BadGraphParams { n, attach_m });
    }
    let m = attach_m as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0u64; n as usize];
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut add_mutual = |a: u32, b: u32, degree: &mut Vec<u64>| {
        edges.push((a, b));
        edges.push((b, a));
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    };

    let core = m + 1;
    for a in 0..core as u32 {
        for b in (a + 1)..core as u32 {
            add_mutual(a, b, &mut degree);
        }
    }

    let mut picked = Vec::with_capacity(m);
    for new in core as u32..n {
        picked.clear();
        // Sample m distinct targets by degree; repeated roulette spins with
        // already-picked nodes masked out.
        for _ in 0..m {
            let total: u64 = degree[..new as usize]
                .iter()
                .enumerate()
                .filter(|(i, _)| !picked.contains(&(*i as u32)))
                .map(|(_, &d)| d)
                .sum();
            debug_assert!(total > 0);
            let mut ball = rng.random_range(0..total);
            let mut chosen = None;
            for (i, &d) in degree[..new as usize].iter().enumerate() {
                if picked.contains(&(i as u32)) {
                    continue;
                }
                if ball < d {
                    chosen = Some(i as u32);
                    break;
                }
                ball -= d;
            }
            picked.push(chosen.expect("roulette lands inside total"));
        }
        for &target in &picked {
            add_mutual(new, target, &mut degree);
        }
    }

    SocialGraph::from_edges(n, &edges)
}

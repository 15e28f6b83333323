//! Agent population: persona profiles, participation classes, the follow
//! graph, and per-agent runtime state.

mod classes;
mod graph;
mod io;
mod persona;

pub use classes::{assign_classes, class_counts, ParticipationClass};
pub use graph::{generate_graph, SocialGraph};
pub use io::{load_edges, load_population, save_edges, save_population};
pub use persona::{generate_personas, AttributePools, PersonaProfile};

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

use crate::util::rng::sub_seed;

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("population size must be positive")]
    EmptyPopulation,
    #[error("attribute pool `{0}` is empty")]
    EmptyPool(&'static str),
    #[error("class split must be three shares in [0, 1] summing to 1, got {0:?}")]
    BadSplit([f64; 3]),
    #[error("graph needs n > attach_m >= 1, got n={n} attach_m={attach_m}")]
    BadGraphParams { n: u32, attach_m: u32 },
    #[error("edge ({src}, {dst}) out of range for {n} agents")]
    EdgeOutOfRange { src: u32, dst: u32, n: u32 },
    #[error("self-loop on agent {0}")]
    SelfLoop(u32),
    #[error("agent {0} follows nobody")]
    Isolated(u32),
    #[error("cannot {action} {path}: {message}")]
    Io { action: &'static str, path: String, message: String },
    #[error("bad population file {path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    /// Content that reached this agent: the focal post or a neighbor message.
    ReceivedUgc,
    /// Something this agent did.
    OwnAction,
    /// A mean-field snapshot this agent saw when it acted.
    ObservedMeanField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub step: u32,
    pub kind: MemoryKind,
    pub content: String,
}

/// Mutable per-agent simulation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: u32,
    pub persona: PersonaProfile,
    pub class: ParticipationClass,
    /// Interest in the focal post, 0 to 10. Exactly 0.0 until first exposure.
    pub opinion: f64,
    /// Social influence weight; tracks whether the agent acted this step.
    pub influence_weight: f64,
    pub memory: VecDeque<MemoryEntry>,
    pub exposed: bool,
    pub activated: bool,
}

impl AgentState {
    pub fn new(id: u32, persona: PersonaProfile, class: ParticipationClass, weight: f64) -> Self {
        AgentState {
            id,
            persona,
            class,
            opinion: 0.0,
            influence_weight: weight,
            memory: VecDeque::new(),
            exposed: false,
            activated: false,
        }
    }

    /// Appends a memory entry, dropping the oldest beyond `capacity`.
    pub fn remember(&mut self, entry: MemoryEntry, capacity: usize) {
        self.memory.push_back(entry);
        while self.memory.len() > capacity {
            self.memory.pop_front();
        }
    }
}

/// The generated agent roster. Graph is kept separately so dynamics can be
/// exercised on synthetic graphs without personas.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub agents: Vec<AgentState>,
}

impl Population {
    /// Generates personas and classes from one master seed. Sub-streams are
    /// tagged so persona text and class assignment stay independent.
    pub fn generate(
        n: u32,
        split: [f64; 3],
        seed: u64,
        initial_weight: f64,
    ) -> Result<Population, PopulationError> {
        let personas = generate_personas(n, sub_seed(seed, "personas"), AttributePools::packaged())?;
        let classes = assign_classes(n, split, sub_seed(seed, "classes"))?;
        let agents = personas
            .into_iter()
            .zip(classes)
            .enumerate()
            .map(|(id, (persona, class))| AgentState::new(id as u32, persona, class, initial_weight))
            .collect();
        Ok(Population { agents })
    }

    pub fn len(&self) -> u32 {
        self.agents.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Agent display names indexed by id.
    pub fn names(&self) -> Vec<String> {
        self.agents.iter().map(|a| a.persona.name.clone()).collect()
    }
}

//! Persona generation: seeded sampling from packaged attribute pools.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PopulationError;

/// Attribute pools personas are drawn from. The packaged set is embedded at
/// build time; callers can substitute their own.
#[derive(Debug, Clone, Deserialize)]
pub struct AttributePools {
    pub first_names: Vec<String>,
    pub last_names: Vec<String>,
    pub genders: Vec<String>,
    pub occupations: Vec<String>,
    pub interests: Vec<String>,
    pub personality: Vec<String>,
}

const POOLS_TOML: &str = include_str!("../../data/attribute_pools.toml");

impl AttributePools {
    pub fn packaged() -> &'static AttributePools {
        static POOLS: std::sync::OnceLock<AttributePools> = std::sync::OnceLock::new();
        POOLS.get_or_init(|| {
            toml::from_str(POOLS_TOML).expect("packaged attribute pools parse")
        })
    }

    fn validate(&self) -> Result<(), PopulationError> {
        for (name, len) in [
            ("first_names", self.first_names.len()),
            ("last_names", self.last_names.len()),
            ("genders", self.genders.len()),
            ("occupations", self.occupations.len()),
            ("interests", self.interests.len()),
            ("personality", self.personality.len()),
        ] {
            if len == 0 {
                return Err(PopulationError::EmptyPool(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaProfile {
    pub name: String,
    pub gender: String,
    pub occupation: String,
    /// 2..=5 distinct interest tags.
    pub interests: Vec<String>,
    /// 1..=3 distinct personality traits.
    pub personality: Vec<String>,
}

/// Samples `n` personas. Names are made unique by suffixing a number on
/// collision, so downstream text (prompts, summaries) never conflates agents.
pub fn generate_personas(
    n: u32,
    seed: u64,
    pools: &AttributePools,
) -> Result<Vec<PersonaProfile>, PopulationError> {
    if n == 0 {
        return Err(PopulationError::EmptyPopulation);
    }
    pools.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let first = pools.first_names.choose(&mut rng).unwrap();
        let last = pools.last_names.choose(&mut rng).unwrap();
        let mut name = format!("{first} {last}");
        let mut bump = 2u32;
        while !seen.insert(name.clone()) {
            name = format!("{first} {last} {bump}");
            bump += 1;
        }
        let n_interests = rng.random_range(2..=5usize).min(pools.interests.len());
        let mut interests: Vec<String> = pools
            .interests
            .choose_multiple(&mut rng, n_interests)
            .cloned()
            .collect();
        interests.sort();
        let n_traits = rng.random_range(1..=3usize).min(pools.personality.len());
        let mut personality: Vec<String> = pools
            .personality
            .choose_multiple(&mut rng, n_traits)
            .cloned()
            .collect();
        personality.sort();
        out.push(PersonaProfile {
            name,
            gender: pools.genders.choose(&mut rng).unwrap().clone(),
            occupation: pools.occupations.choose(&mut rng).unwrap().clone(),
            interests,
            personality,
        });
    }
    // Shuffle so lexicographic sorting above leaves no cross-agent ordering bias.
    out.shuffle(&mut rng);
    Ok(out)
}

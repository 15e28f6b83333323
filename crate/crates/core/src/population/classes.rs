//! Participation classes: most agents lurk, few contribute, almost none
//! create. Counts follow the configured split via largest-remainder
//! rounding, then the roles are shuffled across agent ids.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PopulationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipationClass {
    Lurker,
    Contributor,
    Creator,
}

impl ParticipationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ParticipationClass::Lurker => "lurker",
            ParticipationClass::Contributor => "contributor",
            ParticipationClass::Creator => "creator",
        }
    }
}

/// Exact per-class counts for `n` agents: floor each share, then hand the
/// leftover seats to the largest fractional remainders (ties favor the
/// rarer class so creators are not starved at small n).
pub fn class_counts(n: u32, split: [f64; 3]) -> Result<[u32; 3], PopulationError> {
    let sum: f64 = split.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || split.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
        return Err(PopulationError::BadSplit(split));
    }
    let mut counts = [0u32; 3];
    let mut remainders = [(0.0f64, 0usize); 3];
    let mut assigned = 0u32;
    for (i, &share) in split.iter().enumerate() {
        let exact = share * n as f64;
        counts[i] = exact.floor() as u32;
        assigned += counts[i];
        remainders[i] = (exact - exact.floor(), i);
    }
    // Sort by remainder descending; on equal remainders prefer the later
    // (rarer) class, hence index descending.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
    let mut leftover = n - assigned;
    for &(_, idx) in remainders.iter().cycle() {
        if leftover == 0 {
            break;
        }
        counts[idx] += 1;
        leftover -= 1;
    }
    Ok(counts)
}

/// Assigns a class to each of `n` agents. Counts are deterministic from the
/// split; which agent lands in which class depends only on `seed`.
pub fn assign_classes(
    n: u32,
    split: [f64; 3],
    seed: u64,
) -> Result<Vec<ParticipationClass>, PopulationError> {
    let counts = class_counts(n, split)?;
    let mut classes = Vec::with_capacity(n as usize);
    for (class, &count) in [
        ParticipationClass::Lurker,
        ParticipationClass::Contributor,
        ParticipationClass::Creator,
    ]
    .iter()
    .zip(&counts)
    {
        classes.extend(std::iter::repeat_n(*class, count as usize));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    classes.shuffle(&mut rng);
    Ok(classes)
}

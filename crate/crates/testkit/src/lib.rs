//! Reference implementations used as oracles in tests. Everything here is
//! written the straightforward way, independent of how the main crate
//! computes the same quantities, so agreement between the two is evidence
//! rather than tautology.

pub mod metrics;
pub mod opinion;
pub mod stats;

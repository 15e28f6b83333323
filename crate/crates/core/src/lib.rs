//! Deterministic social-network sandbox. A seeded population of persona
//! agents passes user-generated content around a follow graph; opinion
//! dynamics and a compact textual summary track the propagation, and the
//! resulting features feed popularity prediction.

pub mod backend;
pub mod config;
pub mod dynamics;
pub mod meanfield;
pub mod population;
pub mod predict;
pub mod prompt;
pub mod runtime;
pub mod util;

//! Small shared helpers: text tokenization, counter-based RNG streams, digests.

pub mod digest;
pub mod rng;
pub mod text;

//! Exact invariants of closed manifolds built from a small catalog, and a
//! cited rule base deciding totally real immersions and embeddings into
//! complex space of the same dimension.

pub mod abelian;
pub mod cli;
pub mod cohomology6;
pub mod constructions;
pub mod decisions;
pub mod manifolds;

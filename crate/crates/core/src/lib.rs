//! Embodied navigation benchmark engine: geometry, scenes, simulation,
//! episode generation and evaluation.

pub mod env;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod sim;
pub mod tasks;

//! Exact group-algebra influence matrices for controlled-SWAP brickwork circuits,
//! with stochastic, spectral and quantum-memory diagnostics.

pub mod chain;
pub mod error;
pub mod gates;
pub mod group_walk;
pub mod influence_matrix;
pub mod linalg;
pub mod memory;
pub mod spectral;
pub mod stochastic;

pub use error::{Error, Result};

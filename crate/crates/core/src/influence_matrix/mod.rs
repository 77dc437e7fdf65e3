//! Influence matrices as temporal matrix-product states.

pub mod brute;
pub mod exact;
pub mod grow;
pub mod mps;
pub mod solvable;

pub use brute::{brute_force_observable, simulate_chain, Backend, BathState, BruteForceOptions};
pub use exact::{build_exact_im, build_im, im_local_tensor, BondBasis, BondLabel, BondStrategy};
pub use grow::{grow_im, grow_im_truncated};
pub use mps::{compress, contract_with_process, temporal_entanglement, Compressed, TEEProfile, TemporalMPS};
pub use solvable::{check_solvable_state, left_steady_state, PairState};

//! The influence matrix as a Markov chain on the group manifold.

pub mod channel;
pub mod transfer;
pub mod walk;

pub use channel::{mixed_channel, named_state, QuantumChannel};
pub use transfer::{
    exact_observable_via_transfer, exact_two_point_via_transfer, snapped_walk_observable, transfer_by_enumeration,
    transfer_by_polynomials,
};
pub use walk::{
    conditional_prob, estimate_observable, estimate_observable_series, estimate_two_point, initial_prob, Branch,
    MCEstimate, TwoPointEstimate, WalkConfig,
};

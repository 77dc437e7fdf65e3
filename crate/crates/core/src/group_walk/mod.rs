//! Projective group elements, reachable sets, growth classification and coverings.

pub mod covering;
pub mod element;
pub mod haar;
pub mod polynomial;
pub mod reachable;

pub use covering::{build_covering, snap, CoveringGrid};
pub use element::{distance, inverse, multiply, project_to_group, GroupElement, Quat};
pub use haar::{sample_haar, sample_haar_unitary, sample_haar_with};
pub use reachable::{
    classify_counts, classify_growth, generators, reachable_set, reachable_set_capped, GrowthClass,
    GrowthFitOptions, GrowthVerdict, ReachableSet, DEFAULT_CAP, DEFAULT_TOL,
};

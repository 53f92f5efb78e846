//! Exact generators on small state spaces, spectral gaps and the bound
//! suite used to control them.

pub mod analytic;
pub mod bounds;
pub mod chain;
pub mod eigen;
pub mod state;

pub use analytic::{
    activation_energy, contact_projection, corner_flip_check, corner_flip_reference, full_envelope,
    leftmost_contact_chain, one_touch_ratio, segment_gaps, Comparison, CornerFlipReport, SegmentReport,
};
pub use bounds::{
    bottleneck_ratio, decomposition_bound, dirichlet_form, flux_bound, flux_constants, projection_chain,
    restricted_chain, variance, DecompositionReport, FluxReport, Projection,
};
pub use chain::{build_generator, build_generator_on, GeneratorMatrix, RateRule, ReversibleChain};
pub use eigen::{spectral_gap, spectral_gap_with, EigenMethod, EigenOptions, GapReport};
pub use state::{SpaceSpec, StateSpace, Subset, DEFAULT_STATE_CAP};

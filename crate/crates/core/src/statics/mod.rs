//! Equilibrium quantities: closed-form free energies, exact partition
//! functions, ballot counts, the contact-window decomposition and exact
//! sampling.

pub mod ballot;
pub mod free_energy;
pub mod partition;
pub mod sampler;
pub mod window;

pub use ballot::{ballot_count, conditioned_positivity_probability, BallotCount};
pub use free_energy::{
    d_lambda, double_well_threshold, entropy_q, free_energy, free_energy_elevated, lambda_c, PhasePoint, Regime,
};
pub use partition::{
    expected_contacts, log_partition, partition_elevated, partition_zero, ElevatedPartition, PathSpec, Restriction,
    WeightTable, ZeroPartitionTable,
};
pub use sampler::{
    contact_window_stats, gibbs_sample, pinned_profile, scaling_profile, sup_deviation, GibbsSampler, WindowStats,
};
pub use window::{partition_window, profile_weight_y, windows, ContactWindow, WindowSums};

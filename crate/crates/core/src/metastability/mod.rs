//! Exit-time experiments: which well is metastable, exact starts from it,
//! exit-time laws, the growth of the relaxation time and the two-well
//! diagnostics.

pub mod exit;
pub mod scaling;
pub mod wells;

pub use exit::{
    exact_relaxation_time, exit_experiment, memorylessness, two_state_trace, ExitOptions, ExitTimeSample, MemoryProbe,
    Rescale, RescaleKind, TwoStateTrace,
};
pub use scaling::{
    gap_ratio, relaxation_scaling, well_diagnostics, well_mass_ratio, GapRatio, RelaxationSource, ScalingOptions,
    ScalingSweep, WellDiagnostics,
};
pub use wells::{metastable_start_sampler, metastable_well, other_well, well_ensemble, MetastableStart};

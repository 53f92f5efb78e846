//! Continuous-time heat-bath corner-flip dynamics.

pub mod fenwick;
pub mod rates;
pub mod simulate;

pub use rates::{rate_kind, rates, RateKind, RateVector};
pub use simulate::{
    coupled_pinning_times, hitting_time, run_to_target, simulate, simulate_restricted, simulate_until, Constraint,
    CoupledPair, Event, HeatBath, HitResult, LogOptions, Observation, StopReason, TrajectoryLog,
};

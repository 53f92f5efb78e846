//! Exact statics, heat-bath dynamics and spectral analysis for a random-walk
//! pinning model whose two endpoints are held at height `<aN>` above an
//! attractive wall.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] : parameters, height profiles, the Hamiltonian and the
//!   elementary corner flip.
//! * [`statics`] : log-domain partition functions, the variational free
//!   energy, ballot counts and exact Gibbs sampling.
//! * [`dynamics`] : the continuous-time corner-flip chain with heat-bath
//!   rates, including restricted chains and hitting times.
//! * [`spectral`] : generator assembly on small state spaces, spectral gaps
//!   and the bound suite (bottleneck, decomposition, flux, corner-flip gap).
//! * [`metastability`] : exit-time experiments and scaling sweeps.

pub mod dynamics;
pub mod error;
pub mod metastability;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod spectral;
pub mod statics;
pub mod stats;

pub use error::{Error, Result};
pub use model::{bracket, Ensemble, ModelParams, Path, PhaseLabel};

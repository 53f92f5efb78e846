//! Which phase is metastable, and exact draws from it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Ensemble, ModelParams, Path, PhaseLabel};
use crate::statics::free_energy::Regime;
use crate::statics::sampler::GibbsSampler;

/// The metastable well `E_1`: paths with a contact when
/// `2 / (1 - 2a) < lambda < lambda_c(a)` (the free phase dominates), free
/// paths when `lambda > lambda_c(a)`.
pub fn metastable_well(a: f64, lambda: f64) -> Result<PhaseLabel> {
    match Regime::classify(a, lambda)? {
        Regime::FreeDoubleWell => Ok(PhaseLabel::Pinned),
        Regime::PinnedDoubleWell => Ok(PhaseLabel::Free),
        Regime::FreeFast => {
            Err(Error::invalid(format!("(a, lambda) = ({a}, {lambda}) has a single well: lambda <= 2 / (1 - 2a)")))
        }
        Regime::CriticalCurve => Err(Error::invalid(format!("lambda = {lambda} sits on the critical curve"))),
    }
}

pub fn other_well(well: PhaseLabel) -> PhaseLabel {
    match well {
        PhaseLabel::Free => PhaseLabel::Pinned,
        PhaseLabel::Pinned => PhaseLabel::Free,
    }
}

pub fn well_ensemble(well: PhaseLabel) -> Ensemble {
    match well {
        PhaseLabel::Free => Ensemble::ElevatedFree,
        PhaseLabel::Pinned => Ensemble::ElevatedPinned,
    }
}

/// Exact sampler of `pi` conditioned on one well.
#[derive(Clone, Debug)]
pub struct MetastableStart {
    well: PhaseLabel,
    sampler: GibbsSampler,
}

impl MetastableStart {
    pub fn new(params: &ModelParams, well: PhaseLabel) -> Result<Self> {
        Ok(Self { well, sampler: GibbsSampler::new(params, well_ensemble(well))? })
    }

    pub fn well(&self) -> PhaseLabel {
        self.well
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Path {
        self.sampler.sample(rng)
    }
}

pub fn metastable_start_sampler(params: &ModelParams, well: PhaseLabel) -> Result<MetastableStart> {
    MetastableStart::new(params, well)
}

//! Exact Gibbs sampling, the macroscopic profile and contact-window
//! statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ensemble, ModelParams, Path};
use crate::statics::free_energy::{d_lambda, double_well_threshold, lambda_c};
use crate::statics::partition::{PathSpec, WeightTable};
use crate::stats::{ks_two_sample, KsResult};

/// Exponent of the concentration window around `L0`.
pub const WINDOW_EXPONENT: f64 = 0.75;

/// Sampler holding the backward table of one ensemble.
#[derive(Clone, Debug)]
pub struct GibbsSampler {
    table: WeightTable,
}

impl GibbsSampler {
    pub fn new(params: &ModelParams, ensemble: Ensemble) -> Result<Self> {
        Self::from_spec(PathSpec::from_params(params, ensemble))
    }

    pub fn from_spec(spec: PathSpec) -> Result<Self> {
        let table = WeightTable::backward(spec)?;
        if table.log_total() == f64::NEG_INFINITY {
            return Err(Error::invalid("empty ensemble: nothing to sample"));
        }
        Ok(Self { table })
    }

    pub fn log_partition(&self) -> f64 {
        self.table.log_total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Path {
        self.table.sample(rng).expect("table checked at construction")
    }
}

/// One exact draw; builds the table on every call, so prefer
/// [`GibbsSampler`] for repeated sampling.
pub fn gibbs_sample<R: Rng + ?Sized>(params: &ModelParams, ensemble: Ensemble, rng: &mut R) -> Result<Path> {
    Ok(GibbsSampler::new(params, ensemble)?.sample(rng))
}

/// `max(a - d x, 0, a + d (x - 1))` with `d = d_lambda`, defined for
/// `lambda > 2/(1-2a)`.
pub fn pinned_profile(a: f64, lambda: f64, x: f64) -> Result<f64> {
    if lambda <= double_well_threshold(a) {
        return Err(Error::invalid(format!("pinned profile needs lambda > 2/(1-2a), got {lambda}")));
    }
    let d = d_lambda(lambda)?;
    Ok((a - d * x).max(0.0).max(a + d * (x - 1.0)))
}

/// Limit of `eta(Nx)/N` under the Gibbs measure: the pinned tent for
/// `lambda >= lambda_c(a)`, the constant `a` otherwise.
pub fn scaling_profile(a: f64, lambda: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("x = {x}: must lie in [0, 1]")));
    }
    if lambda >= lambda_c(a)? {
        pinned_profile(a, lambda, x)
    } else {
        Ok(a)
    }
}

/// `sup_x |eta_x / N - f(x / N)|` against a reference profile.
pub fn sup_deviation(path: &Path, profile: impl Fn(f64) -> f64) -> f64 {
    let n = path.len() as f64;
    path.heights().iter().enumerate().map(|(x, &h)| (h as f64 / n - profile(x as f64 / n)).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    /// `L0 = N a lambda / (lambda - 2)`.
    pub l0: f64,
    /// Half-width `N^alpha` of the concentration window.
    pub half_width: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Fraction of samples with `|L - L0| < N^alpha`.
    pub fraction_in_window: f64,
    /// Two-sample KS of `L` against `N - R`.
    pub symmetry: KsResult,
}

/// Leftmost/rightmost contact statistics of pinned-conditioned samples.
pub fn contact_window_stats<R: Rng + ?Sized>(
    params: &ModelParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<WindowStats> {
    let (a, lambda) = (params.a(), params.lambda());
    if lambda < lambda_c(a)? {
        return Err(Error::invalid(format!("contact-window statistics need lambda >= lambda_c(a), got {lambda}")));
    }
    if n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let n = params.n();
    let sampler = GibbsSampler::new(params, Ensemble::ElevatedPinned)?;
    let (mut left, mut right) = (Vec::with_capacity(n_samples), Vec::with_capacity(n_samples));
    for _ in 0..n_samples {
        let (l, r) = sampler.sample(rng).contact_window().expect("pinned sample has a contact");
        left.push(l);
        right.push(r);
    }
    let l0 = n as f64 * a * lambda / (lambda - 2.0);
    let half_width = (n as f64).powf(WINDOW_EXPONENT);
    let inside = left.iter().filter(|&&l| (l as f64 - l0).abs() < half_width).count();
    let lf: Vec<f64> = left.iter().map(|&l| l as f64).collect();
    let rf: Vec<f64> = right.iter().map(|&r| (n - r) as f64).collect();
    Ok(WindowStats {
        l0,
        half_width,
        fraction_in_window: inside as f64 / n_samples as f64,
        symmetry: ks_two_sample(&lf, &rf),
        left,
        right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_paths;
    use crate::rng::stream;
    use crate::statics::partition::expected_contacts;
    use std::collections::HashMap;

    #[test]
    fn sampler_matches_enumeration_chi_square() {
        let p = ModelParams::new(8, 0.25, 3.0).unwrap();
        let paths = enumerate_paths(&p, Ensemble::Elevated, 24).unwrap();
        let w: Vec<f64> = paths.iter().map(|q| 3f64.powi(q.contacts() as i32)).collect();
        let z: f64 = w.iter().sum();
        let sampler = GibbsSampler::new(&p, Ensemble::Elevated).unwrap();
        let mut rng = stream(11, 0, 0);
        let n = 100_000;
        let mut counts: HashMap<Path, usize> = HashMap::new();
        for _ in 0..n {
            *counts.entry(sampler.sample(&mut rng)).or_default() += 1;
        }
        let chi2: f64 = paths
            .iter()
            .zip(&w)
            .map(|(q, wi)| {
                let e = n as f64 * wi / z;
                let o = counts.get(q).copied().unwrap_or(0) as f64;
                (o - e) * (o - e) / e
            })
            .sum();
        let dist = statrs::distribution::ChiSquared::new((paths.len() - 1) as f64).unwrap();
        let p_value = 1.0 - statrs::distribution::ContinuousCDF::cdf(&dist, chi2);
        assert!(p_value > 0.001, "chi2 = {chi2}, p = {p_value}");
        assert_eq!(counts.len(), paths.len());
    }

    #[test]
    fn restricted_samplers_respect_phase() {
        let p = ModelParams::new(20, 0.2, 4.0).unwrap();
        let mut rng = stream(3, 0, 0);
        let free = GibbsSampler::new(&p, Ensemble::ElevatedFree).unwrap();
        let pinned = GibbsSampler::new(&p, Ensemble::ElevatedPinned).unwrap();
        for _ in 0..2000 {
            assert!(free.sample(&mut rng).min_height() >= 1);
            assert_eq!(pinned.sample(&mut rng).min_height(), 0);
        }
    }

    #[test]
    fn contact_mean_within_three_standard_errors() {
        let p = ModelParams::new(30, 0.2, 3.0).unwrap();
        let exact = expected_contacts(&PathSpec::from_params(&p, Ensemble::Elevated)).unwrap();
        let sampler = GibbsSampler::new(&p, Ensemble::Elevated).unwrap();
        let mut rng = stream(5, 0, 0);
        let h: Vec<f64> = (0..20_000).map(|_| sampler.sample(&mut rng).contacts() as f64).collect();
        let se = (crate::stats::variance(&h) / h.len() as f64).sqrt();
        assert!((crate::stats::mean(&h) - exact).abs() < 3.0 * se);
    }

    #[test]
    fn profile_examples() {
        for (a, lambda) in [(0.1, 6.0), (0.2, 3.0), (0.3, 30.0)] {
            assert!((scaling_profile(a, lambda, 0.0).unwrap() - a).abs() < 1e-15);
            assert!((scaling_profile(a, lambda, 1.0).unwrap() - a).abs() < 1e-15);
        }
        // d_6 = 2/3, so the tent reaches the wall at 0.15 and leaves it at 0.85
        assert!(scaling_profile(0.1, 6.0, 0.15).unwrap().abs() < 1e-15);
        assert_eq!(scaling_profile(0.1, 6.0, 0.5).unwrap(), 0.0);
        assert!(scaling_profile(0.1, 6.0, 0.85).unwrap().abs() < 1e-15);
        assert!(scaling_profile(0.1, 6.0, 0.14).unwrap() > 0.0);
        assert_eq!(scaling_profile(0.2, 3.0, 0.5).unwrap(), 0.2);
        assert!(pinned_profile(0.2, 3.0, 0.5).is_err());
    }

    #[test]
    fn window_statistics() {
        let p = ModelParams::new(400, 0.1, 6.0).unwrap();
        let mut rng = stream(7, 0, 0);
        let s = contact_window_stats(&p, 400, &mut rng).unwrap();
        assert!((s.l0 - 60.0).abs() < 1e-12);
        assert!(s.fraction_in_window >= 0.95);
        assert!(s.symmetry.p_value > 0.001);
        let free = ModelParams::new(400, 0.2, 3.0).unwrap();
        assert!(contact_window_stats(&free, 10, &mut rng).is_err());
    }
}

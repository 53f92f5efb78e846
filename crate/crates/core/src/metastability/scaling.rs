//! Growth of the relaxation time with `N` and the two conditions behind the
//! exponential exit law: a small metastable mass and a gap much smaller than
//! the gaps inside each well.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metastability::exit::{exit_experiment, ExitOptions, Rescale};
use crate::metastability::wells::{metastable_well, other_well};
use crate::model::{ModelParams, PhaseLabel};
use crate::spectral::analytic::activation_energy;
use crate::spectral::bounds::bottleneck_ratio;
use crate::spectral::chain::build_generator;
use crate::spectral::eigen::spectral_gap;
use crate::spectral::state::Subset;
use crate::statics::partition::partition_elevated;
use crate::stats::linear_fit;

/// Least-squares fits need at least this many points.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxationSource {
    Exact,
    /// Mean exit time, used beyond the state cap.
    MeanExitTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSweep {
    pub a: f64,
    pub lambda: f64,
    pub ns: Vec<usize>,
    pub t_rel: Vec<f64>,
    pub source: Vec<RelaxationSource>,
    /// `Var(1_pinned) / E(1_pinned)` where an exact generator was built.
    pub bottleneck: Vec<Option<f64>>,
    /// Slope and intercept of `log T_rel` against `N`.
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// `E(a, lambda)` in the double-well region.
    pub reference: Option<f64>,
}

impl ScalingSweep {
    /// `(1/N) log T_rel` at each grid point.
    pub fn rates(&self) -> Vec<f64> {
        self.ns.iter().zip(&self.t_rel).map(|(&n, t)| t.ln() / n as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    pub state_cap: usize,
    /// Replicas of the exit-time proxy beyond the cap; zero turns the proxy
    /// off and a cap violation becomes an error.
    pub proxy_replicas: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self { state_cap: 3_000_000, proxy_replicas: 0, seed: 0, threads: 1 }
    }
}

/// Relaxation time and bottleneck ratio at one `N`.
pub fn relaxation_point(params: &ModelParams, opts: &ScalingOptions) -> Result<(f64, RelaxationSource, Option<f64>)> {
    match build_generator(params, Subset::All, opts.state_cap) {
        Ok(g) => {
            let t_rel = spectral_gap(&g.chain)?.t_rel;
            let pinned = g.indicator(|h| h.contains(&0));
            let ratio = if pinned.iter().all(|&p| p) { None } else { Some(bottleneck_ratio(&g.chain, &pinned)?) };
            Ok((t_rel, RelaxationSource::Exact, ratio))
        }
        Err(Error::CapExceeded { .. }) if opts.proxy_replicas > 0 => {
            let exit = ExitOptions {
                replicas: opts.proxy_replicas,
                seed: opts.seed,
                run: params.n() as u64,
                t_cap: None,
                threads: opts.threads,
                rescale: Rescale::Mean,
            };
            Ok((exit_experiment(params, &exit)?.mean(), RelaxationSource::MeanExitTime, None))
        }
        Err(e) => Err(e),
    }
}

pub fn relaxation_scaling(a: f64, lambda: f64, ns: &[usize], opts: &ScalingOptions) -> Result<ScalingSweep> {
    if ns.len() < MIN_FIT_POINTS {
        return Err(Error::invalid(format!("need at least {MIN_FIT_POINTS} grid points, got {}", ns.len())));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("N grid must be strictly increasing"));
    }
    let mut t_rel = Vec::with_capacity(ns.len());
    let mut source = Vec::with_capacity(ns.len());
    let mut bottleneck = Vec::with_capacity(ns.len());
    for &n in ns {
        let (t, s, b) = relaxation_point(&ModelParams::new(n, a, lambda)?, opts)?;
        t_rel.push(t);
        source.push(s);
        bottleneck.push(b);
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = t_rel.iter().map(|t| t.ln()).collect();
    let (intercept, slope) = linear_fit(&x, &y);
    let residuals = x.iter().zip(&y).map(|(xi, yi)| yi - intercept - slope * xi).collect();
    Ok(ScalingSweep {
        a,
        lambda,
        ns: ns.to_vec(),
        t_rel,
        source,
        bottleneck,
        slope,
        intercept,
        residuals,
        reference: activation_energy(a, lambda).ok(),
    })
}

/// `pi(E_1) / pi(E_2)`, exact at any `N`.
pub fn well_mass_ratio(params: &ModelParams) -> Result<f64> {
    let z = partition_elevated(params)?;
    let (free, pinned) = (z.log_free, z.log_pinned);
    Ok(match metastable_well(params.a(), params.lambda())? {
        PhaseLabel::Free => (free - pinned).exp(),
        PhaseLabel::Pinned => (pinned - free).exp(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRatio {
    pub n: usize,
    pub gap: f64,
    /// Gap of the chain restricted to `E_1` and to `E_2`; infinite for a
    /// single-state well.
    pub gap_metastable: f64,
    pub gap_stable: f64,
    pub ratio: f64,
}

pub fn gap_ratio(params: &ModelParams, state_cap: usize) -> Result<GapRatio> {
    let well = metastable_well(params.a(), params.lambda())?;
    let restricted = |phase: PhaseLabel| -> Result<f64> {
        let subset = match phase {
            PhaseLabel::Free => Subset::Free,
            PhaseLabel::Pinned => Subset::Pinned,
        };
        let g = build_generator(params, subset, state_cap)?;
        if g.len() < 2 {
            return Ok(f64::INFINITY);
        }
        Ok(spectral_gap(&g.chain)?.gap)
    };
    let gap = spectral_gap(&build_generator(params, Subset::All, state_cap)?.chain)?.gap;
    let gap_metastable = restricted(well)?;
    let gap_stable = restricted(other_well(well))?;
    Ok(GapRatio { n: params.n(), gap, gap_metastable, gap_stable, ratio: gap / gap_metastable.min(gap_stable) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellDiagnostics {
    pub a: f64,
    pub lambda: f64,
    /// `(N, pi(E_1) / pi(E_2))`.
    pub mass_ratio: Vec<(usize, f64)>,
    pub gap_ratio: Vec<GapRatio>,
}

impl WellDiagnostics {
    pub fn mass_ratio_decreasing(&self) -> bool {
        self.mass_ratio.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn gap_ratio_decreasing(&self) -> bool {
        self.gap_ratio.windows(2).all(|w| w[1].ratio < w[0].ratio)
    }
}

pub fn well_diagnostics(
    a: f64,
    lambda: f64,
    mass_ns: &[usize],
    gap_ns: &[usize],
    state_cap: usize,
) -> Result<WellDiagnostics> {
    let mass_ratio = mass_ns
        .iter()
        .map(|&n| Ok((n, well_mass_ratio(&ModelParams::new(n, a, lambda)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let gap_ratio =
        gap_ns.iter().map(|&n| gap_ratio(&ModelParams::new(n, a, lambda)?, state_cap)).collect::<Result<Vec<_>>>()?;
    Ok(WellDiagnostics { a, lambda, mass_ratio, gap_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statics::free_energy::{free_energy_elevated, lambda_c};

    #[test]
    fn bottleneck_lower_bounds_relaxation() {
        let s = relaxation_scaling(0.2, 8.0, &[10, 12, 14, 16], &ScalingOptions::default()).unwrap();
        for (t, b) in s.t_rel.iter().zip(&s.bottleneck) {
            assert!(b.unwrap() <= t * (1.0 + 1e-9));
        }
        assert!(s.slope > 0.0);
        assert_eq!(s.reference, Some(crate::statics::entropy_q(0.4).unwrap()));
        assert!(relaxation_scaling(0.2, 8.0, &[10, 12, 14], &ScalingOptions::default()).is_err());
        assert!(relaxation_scaling(0.2, 8.0, &[10, 14, 12, 16], &ScalingOptions::default()).is_err());
    }

    #[test]
    fn mass_ratio_decays_at_the_well_gap() {
        let (a, lambda) = (0.2, 8.0);
        let ns: Vec<usize> = (1..=8).map(|k| 50 * k).collect();
        let r = well_diagnostics(a, lambda, &ns, &[], 0).unwrap();
        assert!(r.mass_ratio_decreasing());
        // free mass ~ exp(N (-F(lambda, a))) relative to pinned mass
        let rate = (r.mass_ratio[7].1.ln() - r.mass_ratio[3].1.ln()) / 200.0;
        let want = -free_energy_elevated(lambda, a).unwrap().free_energy;
        assert!((rate - want).abs() < 0.01, "{rate} vs {want}");
    }

    #[test]
    fn gap_ratio_shrinks() {
        let r = well_diagnostics(0.25, 6.0, &[], &[12, 16, 20], 1_000_000).unwrap();
        assert!(r.gap_ratio.iter().all(|g| g.ratio < 1.0));
        assert!(r.gap_ratio_decreasing(), "{:?}", r.gap_ratio);
    }

    #[test]
    fn pinned_mass_at_critical_point() {
        let lc = lambda_c(0.2).unwrap();
        let f: Vec<f64> = [50usize, 100, 200, 400]
            .iter()
            .map(|&n| partition_elevated(&ModelParams::new(n, 0.2, lc).unwrap()).unwrap().pinned_fraction())
            .collect();
        assert!(f.windows(2).all(|w| w[1] > w[0]), "{f:?}");
    }
}

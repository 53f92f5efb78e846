//! Quantities with explicit formulas that feed the bound suite: activation
//! energies, the leftmost-contact chain at fixed rightmost contact, window
//! segment gaps and the unconstrained corner-flip comparison.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::LogFactorial;
use crate::spectral::bounds::{dense_labels, projection_chain, Projection};
use crate::spectral::chain::{build_generator, build_generator_on, GeneratorMatrix, RateRule, ReversibleChain};
use crate::spectral::eigen::spectral_gap;
use crate::spectral::state::{SpaceSpec, Subset};
use crate::statics::free_energy::{double_well_threshold, entropy_q, free_energy, lambda_c};
use crate::statics::partition::ZeroPartitionTable;
use crate::statics::window::{ContactWindow, WindowSums};

/// Exponential growth rate `E(a, lambda)` of the relaxation time in the
/// double-well region `lambda > 2 / (1 - 2a)`.
pub fn activation_energy(a: f64, lambda: f64) -> Result<f64> {
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::invalid(format!("a = {a}: must lie in (0, 1/2)")));
    }
    if !(lambda > double_well_threshold(a)) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda = {lambda} outside the double-well region (> {})",
            double_well_threshold(a)
        )));
    }
    let q = entropy_q(2.0 * a)?;
    if lambda >= lambda_c(a)? {
        return Ok(q);
    }
    // log((1 + d) / (1 - d)) = log(lambda - 1) at d = 1 - 2 / lambda
    Ok(free_energy(lambda) - a * (lambda - 1.0).ln() + q)
}

/// `1 - cos(pi / L)`, the gap of the unconstrained corner-flip chain of
/// length `L` with rate-1/2 flips.
pub fn corner_flip_reference(len: usize) -> f64 {
    1.0 - (PI / len as f64).cos()
}

/// `log` of the number of positive excursions of even length `m >= 2`,
/// the Catalan number `C_{m/2 - 1}`.
fn ln_excursions(lf: &LogFactorial, m: usize) -> f64 {
    let k = m / 2 - 1;
    lf.ln_binomial(2 * k, k as i64) - ((k + 1) as f64).ln()
}

/// The chain of the leftmost contact `l` for paths whose rightmost contact
/// is fixed at `r`, with explicit rates: unpinning `l` moves it to the next
/// contact `l'` at rate `lambda Exc(l'-l) Z_{r-l'} / ((1+lambda) Z_{r-l})`;
/// pinning a new leftmost contact `l' < l` has rate
/// `lambda Q(l') Exc(l-l') / ((1+lambda) Q(l))`. States are the admissible
/// `l`, returned in increasing order.
pub fn leftmost_contact_chain(params: &ModelParams, r: usize) -> Result<(ReversibleChain, Vec<usize>)> {
    let n = params.n();
    let b = params.boundary() as usize;
    if r < b || r + b > n || (r - b) % 2 != 0 {
        return Err(Error::invalid(format!("no pinned path has rightmost contact {r}")));
    }
    let lambda = params.lambda();
    let sums = WindowSums::new(params)?;
    let zero: &ZeroPartitionTable = sums.zero_table();
    let lf = LogFactorial::new(n);
    let states: Vec<usize> = (b..=r).step_by(2).collect();
    let ln_down = lambda.ln() - (1.0 + lambda).ln();
    let ln_unpin = -(1.0 + lambda).ln();
    let mut rows = Vec::with_capacity(states.len());
    for &l in &states {
        let mut row = Vec::new();
        for (j, &m) in states.iter().enumerate() {
            let ln_rate = if m > l {
                ln_unpin + lambda.ln() + ln_excursions(&lf, m - l) + zero.log_z(r - m) - zero.log_z(r - l)
            } else if m < l {
                ln_down + sums.log_q(m) + ln_excursions(&lf, l - m) - sums.log_q(l)
            } else {
                continue;
            };
            row.push((j, ln_rate.exp()));
        }
        rows.push(row);
    }
    let log_weight = states.iter().map(|&l| zero.log_z(r - l) + sums.log_q(l)).collect();
    Ok((ReversibleChain::from_rows(log_weight, rows)?, states))
}

/// Projection of a pinned-path generator onto its leftmost (`rightmost =
/// false`) or rightmost contact; returns the projection and the contact
/// positions in block order.
pub fn contact_projection(g: &GeneratorMatrix, rightmost: bool) -> Result<(Projection, Vec<usize>)> {
    let keys: Vec<usize> = g.labels(|h| {
        let c = if rightmost { h.iter().rposition(|&v| v == 0) } else { h.iter().position(|&v| v == 0) };
        c.unwrap_or(usize::MAX)
    });
    if keys.contains(&usize::MAX) {
        return Err(Error::invalid("contact projection needs pinned paths only"));
    }
    let (labels, positions) = dense_labels(&keys);
    Ok((projection_chain(&g.chain, &labels, positions.len())?, positions))
}

/// `pi(one contact) / pi(pinned)` by exact window sums, for the fast regime
/// `lambda <= 2 / (1 - 2a)`.
pub fn one_touch_ratio(params: &ModelParams) -> Result<f64> {
    if params.lambda() > double_well_threshold(params.a()) {
        return Err(Error::invalid("one-touch ratio is studied for lambda <= 2 / (1 - 2a)"));
    }
    let sums = WindowSums::new(params)?;
    Ok((sums.log_one_contact() - sums.log_pinned_total()).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Below,
    Equal,
    Above,
}

impl Comparison {
    /// `value` against `reference` with relative tolerance `tol`.
    pub fn of(value: f64, reference: f64, tol: f64) -> Self {
        if (value - reference).abs() <= tol * reference.abs().max(1e-300) {
            Comparison::Equal
        } else if value < reference {
            Comparison::Below
        } else {
            Comparison::Above
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerFlipReport {
    pub length: usize,
    pub end: i32,
    pub states: usize,
    pub gap: f64,
    /// `1 - cos(pi / L)`.
    pub reference: f64,
    /// Where the exact gap sits relative to the reference.
    pub direction: Comparison,
}

/// Exact gap of the rate-1/2 corner-flip chain on paths between `chi` and
/// `xi` against `1 - cos(pi / L)`.
pub fn corner_flip_check(chi: &[i32], xi: &[i32], cap: usize) -> Result<CornerFlipReport> {
    let spec = SpaceSpec::envelope(chi, xi)?;
    let (length, end) = (spec.n, spec.end);
    let g = build_generator_on(spec, RateRule::Uniform, cap)?;
    if g.len() < 2 {
        return Err(Error::invalid("envelope admits a single path: no dynamics"));
    }
    let gap = spectral_gap(&g.chain)?.gap;
    let reference = corner_flip_reference(length);
    Ok(CornerFlipReport {
        length,
        end,
        states: g.len(),
        gap,
        reference,
        direction: Comparison::of(gap, reference, 1e-9),
    })
}

/// Widest envelope between two heights: the lowest and highest +-1 paths
/// from 0 to `end` over `len` steps.
pub fn full_envelope(len: usize, end: i32) -> Result<(Vec<i32>, Vec<i32>)> {
    let (l, m) = (len as i32, end);
    if m.abs() > l || (l - m) % 2 != 0 {
        return Err(Error::invalid(format!("no +-1 path of length {len} ends at {end}")));
    }
    let chi = (0..=l).map(|x| (-x).max(m - (l - x))).collect();
    let xi = (0..=l).map(|x| x.min(m + (l - x))).collect();
    Ok((chi, xi))
}

fn gap_or_infinite(chain: &ReversibleChain) -> Result<f64> {
    if chain.len() < 2 {
        return Ok(f64::INFINITY);
    }
    Ok(spectral_gap(chain)?.gap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub l: usize,
    pub r: usize,
    /// Gaps of the left strand, the zero-boundary middle and the right
    /// strand; infinite when a segment is frozen.
    pub segments: [f64; 3],
    pub restricted_gap: f64,
    /// `1 - cos(pi / (r - l))` for the middle, infinite when `r = l`.
    pub middle_reference: f64,
}

impl SegmentReport {
    pub fn min_segment(&self) -> f64 {
        self.segments.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Gap of the chain restricted to the window `(l, r)` against the gaps of
/// its three independent segments, each built on its own.
pub fn segment_gaps(params: &ModelParams, w: ContactWindow, cap: usize) -> Result<SegmentReport> {
    let (n, b) = (params.n(), params.boundary());
    let restricted = build_generator(params, Subset::Window { l: w.l, r: w.r }, cap)?;
    let restricted_gap = gap_or_infinite(&restricted.chain)?;
    let strand = |len: usize, start: i32, end: i32| -> Result<f64> {
        let mut lower = vec![1; len + 1];
        lower[0] = start.min(1);
        lower[len] = end.min(1);
        let spec = SpaceSpec { n: len, start, end, lower, upper: None, subset: Subset::All };
        gap_or_infinite(&build_generator_on(spec, RateRule::Uniform, cap)?.chain)
    };
    let left = strand(w.l, b, 0)?;
    let right = strand(n - w.r, 0, b)?;
    let width = w.width();
    let middle = if width == 0 {
        f64::INFINITY
    } else {
        let g = build_generator_on(SpaceSpec::zero(width), RateRule::HeatBath { lambda: params.lambda() }, cap)?;
        gap_or_infinite(&g.chain)?
    };
    let middle_reference = if width == 0 { f64::INFINITY } else { corner_flip_reference(width) };
    Ok(SegmentReport { l: w.l, r: w.r, segments: [left, middle, right], restricted_gap, middle_reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::bounds::{flux_bound, flux_constants};
    use crate::statics::window::windows;

    #[test]
    fn activation_energy_branches() {
        let q = entropy_q(0.5).unwrap();
        assert!((q - 0.130812).abs() < 1e-6);
        assert_eq!(activation_energy(0.25, 50.0).unwrap(), q);
        let lc = lambda_c(0.2).unwrap();
        let below = free_energy(lc) - 0.2 * (lc - 1.0).ln() + entropy_q(0.4).unwrap();
        assert!((below - entropy_q(0.4).unwrap()).abs() < 1e-9);
        assert!(activation_energy(0.2, 3.0).is_err());
        // the lower branch closes at the threshold of the double-well region
        let t = double_well_threshold(0.2);
        let near: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|e| activation_energy(0.2, t + e).unwrap()).collect();
        assert!(near.windows(2).all(|w| w[1] < w[0]) && near[2].abs() < 1e-4, "{near:?}");
    }

    #[test]
    fn leftmost_chain_matches_projection() {
        let p = ModelParams::new(14, 0.2, 6.0).unwrap();
        let g = build_generator(&p, Subset::Pinned, 100_000).unwrap();
        let b = p.boundary() as usize;
        for r in (b..=14 - b).step_by(2) {
            let keep = g.indicator(|h| h.iter().rposition(|&v| v == 0) == Some(r));
            let (sub, old) = g.chain.restrict(&keep).unwrap();
            let lefts: Vec<usize> =
                old.iter().map(|&i| g.space.heights(i).iter().position(|&v| v == 0).unwrap()).collect();
            let (labels, positions) = dense_labels(&lefts);
            let proj = projection_chain(&sub, &labels, positions.len()).unwrap();
            let (analytic, states) = leftmost_contact_chain(&p, r).unwrap();
            assert_eq!(states, positions);
            for i in 0..states.len() {
                assert!((analytic.pi()[i] - proj.pi_bar[i]).abs() < 1e-12);
                for j in 0..states.len() {
                    let want = proj.rates[i][j];
                    let got = analytic.rate(i, j).unwrap_or(0.0);
                    assert!((got - want).abs() <= 1e-12 * want.max(1e-300), "r={r} {i}->{j}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn flux_bound_on_leftmost_chain() {
        let p = ModelParams::new(40, 0.2, 8.0).unwrap();
        let (chain, states) = leftmost_contact_chain(&p, 32).unwrap();
        // unpinning to the nearest contact: lambda Z_{r-l-2} / ((1 + lambda) Z_{r-l})
        let zero = ZeroPartitionTable::new(8.0, 40).unwrap();
        for (i, &l) in states.iter().enumerate().take(states.len() - 1) {
            let want = 8.0 / 9.0 * (zero.log_z(32 - l - 2) - zero.log_z(32 - l)).exp();
            assert!((chain.rate(i, i + 1).unwrap() - want).abs() < 1e-12 * want);
        }
        let (alpha, beta) = flux_constants(&chain);
        let r = flux_bound(&chain, alpha, beta).unwrap();
        assert!(r.holds(1e-9), "{r:?}");
    }

    #[test]
    fn corner_flip_small_envelopes() {
        let (chi, xi) = full_envelope(2, 0).unwrap();
        let r = corner_flip_check(&chi, &xi, 100).unwrap();
        assert_eq!(r.gap, 1.0);
        assert_eq!(r.direction, Comparison::Equal);
        for (len, end) in [(6usize, 0i32), (7, 1), (8, 2)] {
            let (chi, xi) = full_envelope(len, end).unwrap();
            let r = corner_flip_check(&chi, &xi, 10_000).unwrap();
            assert_eq!(r.direction, Comparison::Equal, "{r:?}");
        }
        let (chi, _) = full_envelope(4, 0).unwrap();
        assert!(corner_flip_check(&chi, &chi, 10).is_err());
    }

    #[test]
    fn window_gap_is_min_of_segments() {
        for (n, a, lambda) in [(12usize, 0.2, 6.0), (14, 0.3, 1.5)] {
            let p = ModelParams::new(n, a, lambda).unwrap();
            for w in windows(&p) {
                let s = segment_gaps(&p, w, 100_000).unwrap();
                let m = s.min_segment();
                if m.is_infinite() {
                    assert!(s.restricted_gap.is_infinite());
                } else {
                    assert!((s.restricted_gap - m).abs() < 1e-9 * m, "{s:?}");
                }
                assert!(s.segments[1] >= s.middle_reference - 1e-9, "{s:?}");
            }
        }
    }

    #[test]
    fn one_touch_positive() {
        let p = ModelParams::new(60, 0.25, 1.8).unwrap();
        assert!(one_touch_ratio(&p).unwrap() > 0.0);
        assert!(one_touch_ratio(&ModelParams::new(60, 0.25, 5.0).unwrap()).is_err());
    }
}

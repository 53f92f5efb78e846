//! Closed-form and variational free energies, the optimal slope and the
//! critical curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points of the coarse grid used to maximise the variational objective.
pub const VARIATIONAL_GRID: usize = 2048;

/// Absolute tolerance of the critical-curve bisection (relative above 1).
pub const LAMBDA_C_TOL: f64 = 1e-10;

const LAMBDA_C_START: f64 = 1e3;
const LAMBDA_C_HARD_CAP: f64 = 1e300;

/// Zero-boundary free energy `log(lambda / (2 sqrt(lambda - 1)))` for
/// `lambda > 2`, zero otherwise.
pub fn free_energy(lambda: f64) -> f64 {
    if lambda <= 2.0 {
        return 0.0;
    }
    // ln_1p keeps the ~(lambda-2)^2/8 behaviour near 2 accurate
    let eps = lambda - 2.0;
    if eps < 1.0 {
        (0.5 * eps).ln_1p() - 0.5 * eps.ln_1p()
    } else {
        (lambda / (2.0 * (lambda - 1.0).sqrt())).ln()
    }
}

/// Entropic cost of slope `d`: `[(1+d)log(1+d) + (1-d)log(1-d)] / 2`.
pub fn entropy_q(d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::invalid(format!("q(d) needs d in [0, 1], got {d}")));
    }
    let xlogx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    Ok(0.5 * (xlogx(1.0 + d) + xlogx(1.0 - d)))
}

/// Optimal descent slope `1 - 2/lambda`.
pub fn d_lambda(lambda: f64) -> Result<f64> {
    if lambda <= 2.0 {
        return Err(Error::invalid(format!("d_lambda needs lambda > 2, got {lambda}")));
    }
    Ok(1.0 - 2.0 / lambda)
}

/// The same slope through the free energy: `sqrt(1 - exp(-2 F(lambda)))`.
pub fn d_lambda_from_free_energy(lambda: f64) -> Result<f64> {
    if lambda <= 2.0 {
        return Err(Error::invalid(format!("d_lambda needs lambda > 2, got {lambda}")));
    }
    Ok((-(-2.0 * free_energy(lambda)).exp_m1()).sqrt())
}

/// `2 / (1 - 2a)`: above it the dynamics has two wells.
pub fn double_well_threshold(a: f64) -> f64 {
    2.0 / (1.0 - 2.0 * a)
}

/// Objective `F(lambda)(1 - 2a/d) - (2a/d) q(d)` on `d in [2a, 1]`.
pub fn variational_objective(lambda: f64, a: f64, d: f64) -> f64 {
    let ratio = 2.0 * a / d;
    let q = entropy_q(d.clamp(0.0, 1.0)).expect("clamped");
    free_energy(lambda) * (1.0 - ratio) - ratio * q
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `lambda <= 2/(1-2a)`: single well, polynomial relaxation.
    FreeFast,
    /// `2/(1-2a) < lambda < lambda_c(a)`.
    FreeDoubleWell,
    /// `lambda > lambda_c(a)`.
    PinnedDoubleWell,
    /// `lambda = lambda_c(a)` within the bisection tolerance.
    CriticalCurve,
}

impl Regime {
    pub fn classify(a: f64, lambda: f64) -> Result<Self> {
        check_a(a)?;
        if lambda <= double_well_threshold(a) {
            return Ok(Regime::FreeFast);
        }
        let lc = lambda_c(a)?;
        let tol = 10.0 * LAMBDA_C_TOL * lc.max(1.0);
        Ok(if (lambda - lc).abs() <= tol {
            Regime::CriticalCurve
        } else if lambda < lc {
            Regime::FreeDoubleWell
        } else {
            Regime::PinnedDoubleWell
        })
    }

    pub fn is_double_well(&self) -> bool {
        !matches!(self, Regime::FreeFast)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub a: f64,
    pub lambda: f64,
    /// `F(lambda, a)` from the closed form.
    pub free_energy: f64,
    /// Same quantity from direct maximisation.
    pub free_energy_numeric: f64,
    /// Maximiser of the variational objective on `[2a, 1]`.
    pub d_star: f64,
    /// Spacing of the coarse maximisation grid.
    pub grid_step: f64,
    pub regime: Regime,
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::invalid(format!("a = {a}: must lie in (0, 1/2)")));
    }
    Ok(())
}

/// Free energy with elevated boundary, by the closed form and by numerical
/// maximisation of the variational problem.
pub fn free_energy_elevated(lambda: f64, a: f64) -> Result<PhasePoint> {
    check_a(a)?;
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda = {lambda}: must be > 0")));
    }
    let closed = if lambda > 2.0 {
        let d = d_lambda(lambda)?;
        (free_energy(lambda) - a * ((1.0 + d) / (1.0 - d)).ln()).max(0.0)
    } else {
        0.0
    };
    let (d_star, inner_max, grid_step) = maximise_objective(lambda, a);
    Ok(PhasePoint {
        a,
        lambda,
        free_energy: closed,
        free_energy_numeric: inner_max.max(0.0),
        d_star,
        grid_step,
        regime: Regime::classify(a, lambda)?,
    })
}

/// Grid search on `[2a, 1]` followed by golden-section refinement around the
/// best grid point. Returns `(argmax, max, grid step)`.
pub fn maximise_objective(lambda: f64, a: f64) -> (f64, f64, f64) {
    let lo = 2.0 * a;
    let step = (1.0 - lo) / (VARIATIONAL_GRID - 1) as f64;
    let f = |d: f64| variational_objective(lambda, a, d);
    let (best, _) = (0..VARIATIONAL_GRID)
        .map(|i| (i, f(lo + i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let left = lo + best.saturating_sub(1) as f64 * step;
    let right = (lo + (best + 1) as f64 * step).min(1.0);
    let (d, v) = golden_section_max(f, left, right, 1e-14);
    let grid_value = f(lo + best as f64 * step);
    if grid_value >= v {
        (lo + best as f64 * step, grid_value, step)
    } else {
        (d, v, step)
    }
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    let candidates = [(x, f(x)), (lo, f(lo)), (hi, f(hi))];
    candidates.into_iter().fold((x, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc })
}

/// Residual `F(lambda) - a log(lambda - 1)` whose root is `lambda_c(a)`.
pub fn critical_residual(lambda: f64, a: f64) -> f64 {
    free_energy(lambda) - a * (lambda - 1.0).ln()
}

/// Critical pinning strength: unique root of `F(lambda) = a log(lambda - 1)`
/// on `(2, inf)`, by bisection.
pub fn lambda_c(a: f64) -> Result<f64> {
    check_a(a)?;
    // residual ~ (lambda-2)^2/8 - a (lambda-2) is negative just above 2
    let mut lo = 2.0 + (4.0 * a).min(1e-3);
    if critical_residual(lo, a) >= 0.0 {
        return Err(Error::Numerical(format!("critical residual not negative near 2 for a = {a}")));
    }
    let mut hi = LAMBDA_C_START;
    while critical_residual(hi, a) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > LAMBDA_C_HARD_CAP {
            return Err(Error::Convergence(format!("lambda_c({a}) not bracketed below {LAMBDA_C_HARD_CAP:e}")));
        }
    }
    for _ in 0..10_000 {
        if hi - lo <= LAMBDA_C_TOL * lo.max(1.0) {
            break;
        }
        // geometric midpoint while the bracket spans decades
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if critical_residual(mid, a) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_energy_examples() {
        assert_eq!(free_energy(2.0), 0.0);
        assert_eq!(free_energy(1.0), 0.0);
        assert!((free_energy(4.0) - (2.0 / 3f64.sqrt()).ln()).abs() < 1e-15);
        assert!((free_energy(4.0) - 0.1438).abs() < 1e-4);
        // continuity at 2
        assert!(free_energy(2.0 + 1e-8) < 1e-16);
        assert!((free_energy(2.5) - (2.5 / (2.0 * 1.5f64.sqrt())).ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_q(0.0).unwrap(), 0.0);
        assert!((entropy_q(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(entropy_q(1.5).is_err());
        assert!(entropy_q(-0.1).is_err());
    }

    #[test]
    fn entropy_matches_binomial_extrapolation() {
        // -(1/N) log(binom(N, (N + dN)/2) / 2^N) at d = 1/2, fitted as
        // q + c log(N)/N + e/N + g/N^2 over a range of N
        let lnfact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
        let rows: Vec<(f64, f64)> = (200..=2000)
            .step_by(200)
            .map(|n| {
                let k = n * 3 / 4;
                let lb = lnfact(n) - lnfact(k) - lnfact(n - k) - n as f64 * 2f64.ln();
                (n as f64, -lb / n as f64)
            })
            .collect();
        // least squares on [1, ln N / N, 1/N, 1/N^2]
        let mut ata = nalgebra::Matrix4::<f64>::zeros();
        let mut atb = nalgebra::Vector4::<f64>::zeros();
        for &(n, y) in &rows {
            let v = nalgebra::Vector4::new(1.0, n.ln() / n, 1.0 / n, 1.0 / (n * n));
            ata += v * v.transpose();
            atb += v * y;
        }
        let coef = ata.lu().solve(&atb).unwrap();
        assert!((coef[0] - 0.130812035941137).abs() < 1e-6, "{}", coef[0]);
        assert!((entropy_q(0.5).unwrap() - coef[0]).abs() < 1e-6);
    }

    #[test]
    fn entropy_is_convex() {
        let h = 1e-3;
        for i in 1..999 {
            let d = i as f64 * h;
            let second = entropy_q(d + h).unwrap() - 2.0 * entropy_q(d).unwrap() + entropy_q(d - h).unwrap();
            assert!(second >= 0.0);
        }
    }

    #[test]
    fn d_lambda_examples() {
        assert_eq!(d_lambda(4.0).unwrap(), 0.5);
        assert!((d_lambda(10.0).unwrap() - 0.8).abs() < 1e-15);
        assert!((d_lambda_from_free_energy(10.0).unwrap() - 0.8).abs() < 1e-12);
        assert!(d_lambda(2.0).is_err());
        assert!(d_lambda(2.0 + 1e-9).unwrap() < 1e-9);
        for lambda in [2.1, 3.0, 4.0, 7.5, 20.0, 1000.0] {
            assert!((d_lambda(lambda).unwrap() - d_lambda_from_free_energy(lambda).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn elevated_free_energy_examples() {
        for lambda in [0.5, 1.0, 2.0] {
            let p = free_energy_elevated(lambda, 0.2).unwrap();
            assert_eq!(p.free_energy, 0.0);
            assert_eq!(p.free_energy_numeric, 0.0);
        }
        // on the double-well threshold: d_lambda = 2a and both branches meet
        let p = free_energy_elevated(4.0, 0.25).unwrap();
        assert_eq!(p.free_energy, 0.0);
        assert_eq!(p.regime, Regime::FreeFast);
        let inner = variational_objective(4.0, 0.25, 0.5);
        assert!((inner + entropy_q(0.5).unwrap()).abs() < 1e-12);

        let p = free_energy_elevated(6.0, 0.1).unwrap();
        let closed = free_energy(6.0) - 0.1 * 5f64.ln();
        assert!((p.free_energy - closed).abs() < 1e-15);
        assert!((p.free_energy - p.free_energy_numeric).abs() < 1e-8);
        assert!((p.d_star - 2.0 / 3.0).abs() <= p.grid_step);
    }

    #[test]
    fn critical_curve() {
        for a in [0.05, 0.1, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45] {
            let lc = lambda_c(a).unwrap();
            assert!(critical_residual(lc, a).abs() <= 1e-9, "a = {a}");
            let h = 1e-6 * lc;
            assert!(critical_residual(lc - h, a) < 0.0 && critical_residual(lc + h, a) > 0.0);
            assert!(lc >= double_well_threshold(a));
        }
        let mut prev = 2.0;
        for i in 1..=45 {
            let lc = lambda_c(i as f64 * 0.01).unwrap();
            assert!(lc > prev);
            prev = lc;
        }
        assert!(lambda_c(1e-4).unwrap() - 2.0 < 1e-2);
        assert!(lambda_c(0.49).is_ok());
    }

    #[test]
    fn right_derivative_at_critical_point_is_positive() {
        for a in [0.1, 0.2, 0.3] {
            let lc = lambda_c(a).unwrap();
            let h = 1e-4;
            let above = free_energy_elevated(lc + h, a).unwrap().free_energy;
            let at = free_energy_elevated(lc, a).unwrap().free_energy;
            assert!((above - at) / h > 1e-3);
        }
    }
}

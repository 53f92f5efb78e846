//! Decomposition of pinned paths by their leftmost and rightmost contact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{ln_sum, LogFactorial};
use crate::statics::free_energy::{entropy_q, free_energy};
use crate::statics::partition::ZeroPartitionTable;

/// Leftmost (`l`) and rightmost (`r`) contact of a pinned path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContactWindow {
    pub l: usize,
    pub r: usize,
}

impl ContactWindow {
    /// Validates membership in the admissible window set for `params`.
    pub fn new(params: &ModelParams, l: usize, r: usize) -> Result<Self> {
        let b = params.boundary() as usize;
        let n = params.n();
        if l % 2 != 0 || r % 2 != 0 || l < b || l > r || r > n - b {
            return Err(Error::invalid(format!(
                "window ({l}, {r}) outside the admissible set: need even {b} <= l <= r <= {}",
                n - b
            )));
        }
        Ok(Self { l, r })
    }

    pub fn width(&self) -> usize {
        self.r - self.l
    }
}

/// Every admissible window, ordered by `(l, r)`.
pub fn windows(params: &ModelParams) -> Vec<ContactWindow> {
    let b = params.boundary() as usize;
    let n = params.n();
    (b..=n - b).step_by(2).flat_map(|l| (l..=n - b).step_by(2).map(move |r| ContactWindow { l, r })).collect()
}

/// Precomputed factors of the product formula for one parameter set.
#[derive(Clone, Debug)]
pub struct WindowSums {
    params: ModelParams,
    zero: ZeroPartitionTable,
    lf: LogFactorial,
}

impl WindowSums {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Ok(Self {
            params: *params,
            zero: ZeroPartitionTable::new(params.lambda(), params.n())?,
            lf: LogFactorial::new(params.n()),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn zero_table(&self) -> &ZeroPartitionTable {
        &self.zero
    }

    /// `log Q(len, <aN>)`: strictly positive walks from the wall up to the
    /// boundary height.
    pub fn log_q(&self, len: usize) -> f64 {
        let b = self.params.boundary() as usize;
        if len < b || (len - b) % 2 != 0 {
            return f64::NEG_INFINITY;
        }
        (b as f64 / len as f64).ln() + self.lf.ln_binomial(len, ((len + b) / 2) as i64)
    }

    /// `log Z^{l,r}`: the middle factor carries every contact weight,
    /// including those at `l` and `r`.
    pub fn log_window(&self, w: ContactWindow) -> f64 {
        self.zero.log_z(w.width()) + self.log_q(w.l) + self.log_q(self.params.n() - w.r)
    }

    /// Sum over all windows: the pinned partition function.
    pub fn log_pinned_total(&self) -> f64 {
        ln_sum(windows(&self.params).into_iter().map(|w| self.log_window(w)))
    }

    /// Sum over one-contact paths (`l = r`).
    pub fn log_one_contact(&self) -> f64 {
        let b = self.params.boundary() as usize;
        let n = self.params.n();
        ln_sum((b..=n - b).step_by(2).map(|l| self.log_window(ContactWindow { l, r: l })))
    }
}

/// `log Z^{l,r}` by the product formula.
pub fn partition_window(params: &ModelParams, w: ContactWindow) -> Result<f64> {
    let w = ContactWindow::new(params, w.l, w.r)?;
    Ok(WindowSums::new(params)?.log_window(w))
}

/// Exponent `y(l, r) = F(lambda)(r - l) - l q(b/l) - (N - r) q(b/(N - r))`
/// over real `l`, `r`.
pub fn window_exponent(params: &ModelParams, l: f64, r: f64) -> f64 {
    let b = params.boundary() as f64;
    let n = params.n() as f64;
    let q = |d: f64| entropy_q(d.clamp(0.0, 1.0)).expect("clamped");
    free_energy(params.lambda()) * (r - l) - l * q(b / l) - (n - r) * q(b / (n - r))
}

/// `log Y(N, l, r)`, the Stirling-level approximation of `Z^{l,r}`.
pub fn profile_weight_y(params: &ModelParams, w: ContactWindow) -> Result<f64> {
    let w = ContactWindow::new(params, w.l, w.r)?;
    let b = params.boundary() as f64;
    let n = params.n() as f64;
    let (l, r) = (w.l as f64, w.r as f64);
    Ok(n * std::f64::consts::LN_2 - 0.5 * (l - b + 1.0).ln() - 0.5 * (n - r - b + 1.0).ln()
        + window_exponent(params, l, r))
}

/// Real maximiser `l*` of the exponent in `l` (and `N - r*` by symmetry):
/// stationarity gives `<aN> / l* = d_lambda`.
pub fn exponent_maximiser(params: &ModelParams) -> Result<f64> {
    let lambda = params.lambda();
    if lambda <= 2.0 {
        return Err(Error::invalid("the exponent has an interior maximiser only for lambda > 2"));
    }
    Ok(params.boundary() as f64 * lambda / (lambda - 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_paths, Ensemble};
    use crate::statics::partition::partition_elevated;
    use std::collections::HashMap;

    #[test]
    fn window_validation() {
        let p = ModelParams::new(8, 0.2, 2.0).unwrap();
        assert!(ContactWindow::new(&p, 2, 6).is_ok());
        assert!(ContactWindow::new(&p, 0, 6).is_err());
        assert!(ContactWindow::new(&p, 4, 2).is_err());
        assert!(ContactWindow::new(&p, 3, 5).is_err());
        assert!(ContactWindow::new(&p, 2, 8).is_err());
        assert_eq!(windows(&p).len(), 6);
    }

    #[test]
    fn windows_match_enumeration() {
        for &lambda in &[0.5, 1.0, 3.0] {
            let p = ModelParams::new(12, 0.2, lambda).unwrap();
            let sums = WindowSums::new(&p).unwrap();
            let mut by_window: HashMap<(usize, usize), f64> = HashMap::new();
            for path in enumerate_paths(&p, Ensemble::ElevatedPinned, 24).unwrap() {
                let w = path.contact_window().unwrap();
                *by_window.entry(w).or_default() += lambda.powi(path.contacts() as i32);
            }
            for w in windows(&p) {
                let want = by_window.get(&(w.l, w.r)).copied().unwrap_or(0.0);
                assert!((sums.log_window(w) - want.ln()).abs() < 1e-10, "{w:?}");
            }
        }
    }

    #[test]
    fn degenerate_window() {
        let p = ModelParams::new(10, 0.2, 3.0).unwrap();
        let s = WindowSums::new(&p).unwrap();
        let w = ContactWindow { l: 4, r: 4 };
        assert!((s.log_window(w) - (3f64.ln() + s.log_q(4) + s.log_q(6))).abs() < 1e-14);
    }

    #[test]
    fn unit_lambda_counts() {
        let p = ModelParams::new(14, 0.2, 1.0).unwrap();
        let s = WindowSums::new(&p).unwrap();
        let catalan = |k: usize| crate::statics::ballot::binomial(2 * k as u64, k as u64) / (k as u64 + 1);
        for w in windows(&p) {
            let bridges = crate::numeric::ln_biguint(&catalan(w.width() / 2));
            assert!((s.log_window(w) - bridges - s.log_q(w.l) - s.log_q(14 - w.r)).abs() < 1e-12);
        }
    }

    #[test]
    fn windows_complete_the_pinned_sum() {
        for n in [20usize, 60, 120, 200] {
            for &(a, lambda) in &[(0.2, 3.0), (0.25, 6.0), (0.1, 1.5)] {
                let p = ModelParams::new(n, a, lambda).unwrap();
                let direct = partition_elevated(&p).unwrap().log_pinned;
                let sum = WindowSums::new(&p).unwrap().log_pinned_total();
                assert!((sum - direct).abs() < 1e-9, "{n} {a} {lambda}");
            }
        }
    }

    #[test]
    fn y_ratio_is_bounded() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in (50..=400).step_by(50) {
            let p = ModelParams::new(n, 0.25, 6.0).unwrap();
            let s = WindowSums::new(&p).unwrap();
            for w in windows(&p) {
                let d = s.log_window(w) - profile_weight_y(&p, w).unwrap();
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        assert!(hi - lo < 5.0, "log ratio spread {lo}..{hi}");
    }

    #[test]
    fn maximiser_of_exponent() {
        let p = ModelParams::new(400, 0.25, 6.0).unwrap();
        let want = exponent_maximiser(&p).unwrap();
        let n = 400.0;
        let (best, _) = (0..=20_000)
            .map(|i| 100.0 + i as f64 * (n / 2.0 - 100.0) / 20_000.0)
            .map(|l| (l, window_exponent(&p, l, n - l)))
            .fold((0.0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        assert!((best - want).abs() < 0.1, "{best} vs {want}");
    }
}

//! Heat-bath corner-flip rates.

use std::ops::{Add, Div};

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::model::Path;

/// Classification of the flip at one site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateKind {
    /// Corner flip away from the wall: rate 1/2.
    Bulk,
    /// Local maximum at height 2 over neighbours at 1; the flip creates a
    /// contact: rate `lambda / (lambda + 1)`.
    Pin,
    /// Contact at a local minimum; the flip removes it: rate `1 / (lambda + 1)`.
    Unpin,
    /// Corner over neighbours at 0: the flip would go to -1.
    Blocked,
    /// Not a corner, or an endpoint.
    NotCorner,
}

impl RateKind {
    /// Rate in any field containing `lambda`, so that exact rational checks
    /// share this code path.
    pub fn value_in<T>(self, lambda: T) -> T
    where
        T: Clone + One + Add<Output = T> + Div<Output = T> + num_traits::Zero,
    {
        let one = T::one();
        match self {
            RateKind::Bulk => one.clone() / (one.clone() + one),
            RateKind::Pin => lambda.clone() / (lambda + one),
            RateKind::Unpin => one.clone() / (lambda + one),
            RateKind::Blocked | RateKind::NotCorner => T::zero(),
        }
    }

    pub fn value(self, lambda: f64) -> f64 {
        self.value_in(lambda)
    }

    /// Change in the contact number caused by the flip.
    pub fn contact_change(self) -> i32 {
        match self {
            RateKind::Pin => 1,
            RateKind::Unpin => -1,
            _ => 0,
        }
    }
}

/// Kind of the flip at `x` on a raw height array.
#[inline]
pub fn rate_kind(heights: &[i32], x: usize) -> RateKind {
    let n = heights.len() - 1;
    if x == 0 || x >= n {
        return RateKind::NotCorner;
    }
    let m = heights[x - 1];
    if heights[x + 1] != m {
        return RateKind::NotCorner;
    }
    if heights[x] > m {
        match m {
            0 => RateKind::Blocked,
            1 => RateKind::Pin,
            _ => RateKind::Bulk,
        }
    } else if heights[x] == 0 {
        RateKind::Unpin
    } else {
        RateKind::Bulk
    }
}

/// Per-site rates `r_x` and their total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateVector {
    /// Indexed by site `0..=N`; the endpoints carry 0.
    pub rates: Vec<f64>,
    pub kinds: Vec<RateKind>,
    pub total: f64,
}

pub fn rates(eta: &Path, lambda: f64) -> RateVector {
    let h = eta.heights();
    let kinds: Vec<RateKind> = (0..h.len()).map(|x| rate_kind(h, x)).collect();
    let rates: Vec<f64> = kinds.iter().map(|k| k.value(lambda)).collect();
    let total = rates.iter().sum();
    RateVector { rates, kinds, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_paths, Ensemble, ModelParams};
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn local(h: [i32; 3], lambda: f64) -> f64 {
        rate_kind(&[h[0], h[1], h[2], h[1] + 1], 1).value(lambda)
    }

    #[test]
    fn examples() {
        assert_eq!(local([1, 2, 1], 3.0), 0.75);
        assert_eq!(local([1, 0, 1], 3.0), 0.25);
        assert_eq!(local([3, 4, 3], 3.0), 0.5);
        assert_eq!(local([3, 2, 3], 7.0), 0.5);
        assert_eq!(local([0, 1, 0], 3.0), 0.0);
        assert_eq!(local([0, 1, 2], 3.0), 0.0);
        assert_eq!(rate_kind(&[0, 1, 0], 0), RateKind::NotCorner);
    }

    /// Independent coding: a rate-1 heat bath resampling `eta_x` given its
    /// neighbours, reporting the rate of the move to the other value.
    fn heat_bath_rate(h: &[i32], x: usize, lambda: f64) -> f64 {
        if x == 0 || x + 1 >= h.len() || h[x - 1] != h[x + 1] {
            return 0.0;
        }
        let m = h[x - 1];
        let weight = |v: i32| {
            if v < 0 {
                0.0
            } else if v == 0 {
                lambda
            } else {
                1.0
            }
        };
        let (lo, hi) = (weight(m - 1), weight(m + 1));
        let target = 2 * m - h[x];
        if target < 0 {
            return 0.0;
        }
        let w = if target > m { hi } else { lo };
        w / (lo + hi)
    }

    #[test]
    fn agrees_with_heat_bath_coding() {
        for n in [4usize, 6, 8, 10, 12] {
            for &lambda in &[0.5, 1.0, 3.0, 6.0] {
                let p = ModelParams::new(n, 0.2, lambda).unwrap();
                for ens in [Ensemble::Zero, Ensemble::Elevated] {
                    for path in enumerate_paths(&p, ens, 24).unwrap() {
                        let rv = rates(&path, lambda);
                        for x in 0..=n {
                            assert!((rv.rates[x] - heat_bath_rate(path.heights(), x, lambda)).abs() < 1e-15);
                            let admissible = path.flip(x).is_ok();
                            assert_eq!(rv.rates[x] > 0.0, admissible);
                        }
                        assert!(rv.total <= n as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn detailed_balance_exact() {
        let lambda = BigRational::new(BigInt::from(7), BigInt::from(3));
        let pow = |k: usize| (0..k).fold(BigRational::one(), |acc, _| acc * lambda.clone());
        let p = ModelParams::new(12, 0.2, 7.0 / 3.0).unwrap();
        for path in enumerate_paths(&p, Ensemble::Elevated, 24).unwrap() {
            for x in 1..12 {
                let Ok(next) = path.flip(x) else { continue };
                let fwd = pow(path.contacts()) * rate_kind(path.heights(), x).value_in(lambda.clone());
                let bwd = pow(next.contacts()) * rate_kind(next.heights(), x).value_in(lambda.clone());
                assert_eq!(fwd, bwd);
            }
        }
    }
}

//! Exact counts of strictly positive walks.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::numeric::ln_biguint;

/// `Q(l, b)` as an exact integer together with its logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct BallotCount {
    pub value: BigUint,
    pub ln: f64,
}

fn check(l: u64, b: u64) -> Result<()> {
    if b == 0 || b > l || (l - b) % 2 != 0 {
        return Err(Error::invalid(format!("ballot count needs 1 <= b <= l with l - b even, got l = {l}, b = {b}")));
    }
    Ok(())
}

/// `binom(n, k)` by the multiplicative formula.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of walks of length `l` from 0 to `b` staying strictly positive
/// after time 0: `(b / l) binom(l, (l + b) / 2)`.
pub fn ballot_count(l: u64, b: u64) -> Result<BallotCount> {
    check(l, b)?;
    let value = binomial(l, (l + b) / 2) * b / l;
    let ln = ln_biguint(&value);
    Ok(BallotCount { value, ln })
}

/// The same count by reflection: walks whose first step is up, minus those
/// of them that touch zero.
pub fn ballot_count_by_reflection(l: u64, b: u64) -> Result<BigUint> {
    check(l, b)?;
    let k = (l + b) / 2;
    Ok(binomial(l - 1, k - 1) - binomial(l - 1, k))
}

/// `P[S_n > 0 for 0 < n <= l | S_l = b]` for the simple random walk, exact.
pub fn conditioned_positivity_probability(l: u64, b: u64) -> Result<BigRational> {
    let q = ballot_count(l, b)?;
    let total = binomial(l, (l + b) / 2);
    Ok(BigRational::new(q.value.into(), total.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn brute(l: usize, b: i32) -> u64 {
        (0u64..1 << l)
            .filter(|&code| {
                let mut s = 0i32;
                for i in 0..l {
                    s += if code >> i & 1 == 1 { 1 } else { -1 };
                    if s <= 0 {
                        return false;
                    }
                }
                s == b
            })
            .count() as u64
    }

    #[test]
    fn examples() {
        assert_eq!(ballot_count(4, 2).unwrap().value, BigUint::from(2u32));
        assert_eq!(ballot_count(3, 1).unwrap().value, BigUint::from(1u32));
        for l in 1..30 {
            assert_eq!(ballot_count(l, l).unwrap().value, BigUint::one());
        }
        assert!(ballot_count(4, 1).is_err());
        assert!(ballot_count(4, 0).is_err());
        assert!(ballot_count(4, 6).is_err());
    }

    #[test]
    fn matches_enumeration() {
        for l in 1..=20usize {
            for b in (1..=l as i32).filter(|b| (l as i32 - b) % 2 == 0) {
                let want = BigUint::from(brute(l, b));
                assert_eq!(ballot_count(l as u64, b as u64).unwrap().value, want);
                assert_eq!(ballot_count_by_reflection(l as u64, b as u64).unwrap(), want);
            }
        }
    }

    #[test]
    fn probability_is_b_over_l() {
        let half = conditioned_positivity_probability(4, 2).unwrap();
        assert_eq!(half, BigRational::new(BigInt::from(1), BigInt::from(2)));
        assert!(conditioned_positivity_probability(7, 7).unwrap().is_one());
        for l in (100..=400).step_by(37) {
            for b in (1..=l).step_by(5).filter(|b| (l - b) % 2 == 0) {
                let p = conditioned_positivity_probability(l, b).unwrap();
                assert_eq!(p, BigRational::new(BigInt::from(b), BigInt::from(l)));
            }
        }
    }

    #[test]
    fn log_value_is_accurate() {
        let q = ballot_count(4000, 40).unwrap();
        let lf = crate::numeric::LogFactorial::new(4000);
        let want = (40f64 / 4000.0).ln() + lf.ln_binomial(4000, 2020);
        assert!((q.ln - want).abs() < 1e-9);
    }
}

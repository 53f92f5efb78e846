//! Log-domain arithmetic and small numeric helpers.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum exp(x_i))`.
pub fn ln_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + v.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// `log(exp(a) - exp(b))` for `a >= b`; `None` when `b > a`.
pub fn ln_sub(a: f64, b: f64) -> Option<f64> {
    if b > a {
        return None;
    }
    if b == f64::NEG_INFINITY {
        return Some(a);
    }
    Some(a + (-(b - a).exp()).ln_1p())
}

/// Natural log of an arbitrary-precision integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit prefix");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Cumulative table of `log k!`.
#[derive(Clone, Debug)]
pub struct LogFactorial {
    table: Vec<f64>,
}

impl LogFactorial {
    pub fn new(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=max {
            acc += (k as f64).ln();
            table.push(acc);
        }
        Self { table }
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.table[k]
    }

    /// `log binom(n, k)`, `-inf` outside `0 <= k <= n`.
    pub fn ln_binomial(&self, n: usize, k: i64) -> f64 {
        if k < 0 || k as usize > n {
            return f64::NEG_INFINITY;
        }
        let k = k as usize;
        self.table[n] - self.table[k] - self.table[n - k]
    }
}

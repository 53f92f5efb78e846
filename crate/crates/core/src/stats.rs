//! Goodness-of-fit statistics used by the experiments.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

/// `P[K > x]` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // the alternating series converges slowly here; the value is ~1
        let s: f64 = (1..=50)
            .map(|k| {
                let t = (2 * k - 1) as f64 * std::f64::consts::PI / x;
                (-t * t / 8.0).exp()
            })
            .sum();
        return 1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s;
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let v = sorted(xs);
    let n = v.len() as f64;
    let statistic = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    // Stephens' finite-sample correction
    let en = n.sqrt();
    KsResult { statistic, p_value: kolmogorov_survival((en + 0.12 + 0.11 / en) * statistic) }
}

/// KS test against `Exp(1)`.
pub fn ks_exponential(xs: &[f64]) -> KsResult {
    ks_one_sample(xs, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })
}

/// Two-sample KS test; ties are handled by advancing both samples together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    KsResult { statistic: d, p_value: kolmogorov_survival((en + 0.12 + 0.11 / en) * d) }
}

/// Total variation distance between an empirical histogram and a law.
pub fn total_variation<K: Eq + Hash>(counts: &HashMap<K, usize>, law: &HashMap<K, f64>) -> f64 {
    let total: usize = counts.values().sum();
    let mut tv: f64 =
        law.iter().map(|(k, p)| (counts.get(k).copied().unwrap_or(0) as f64 / total as f64 - p).abs()).sum();
    tv += counts.iter().filter(|(k, _)| !law.contains_key(k)).map(|(_, &c)| c as f64 / total as f64).sum::<f64>();
    0.5 * tv
}

/// Empirical survival `P[T > t]`.
pub fn survival(xs: &[f64], t: f64) -> f64 {
    xs.iter().filter(|&&x| x > t).count() as f64 / xs.len() as f64
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Empirical quantile by linear interpolation, `p` in `[0, 1]`.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let v = sorted(xs);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < v.len() {
        v[i] * (1.0 - frac) + v[i + 1] * frac
    } else {
        v[i]
    }
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_values() {
        // standard critical values
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(0.2) - 1.0).abs() < 1e-6);
        assert!(kolmogorov_survival(0.3 - 1e-9) - kolmogorov_survival(0.3 + 1e-9) < 1e-6);
    }

    #[test]
    fn ks_on_exact_quantiles() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| -(1.0 - (i as f64 + 0.5) / n as f64).ln()).collect();
        let r = ks_exponential(&xs);
        assert!(r.statistic <= 0.5 / n as f64 + 1e-12);
        assert!(r.p_value > 0.99);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.5).collect();
        assert!(ks_exponential(&shifted).p_value < 1e-6);
    }

    #[test]
    fn two_sample() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(ks_two_sample(&a, &a).statistic, 0.0);
        let b: Vec<f64> = (50..150).map(f64::from).collect();
        assert!((ks_two_sample(&a, &b).statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tv_and_moments() {
        let counts = HashMap::from([(0, 30usize), (1, 70)]);
        let law = HashMap::from([(0, 0.5), (1, 0.5)]);
        assert!((total_variation(&counts, &law) - 0.2).abs() < 1e-12);
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(survival(&xs, 2.0), 0.5);
        let (c, s) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((c - 1.0).abs() < 1e-12 && (s - 2.0).abs() < 1e-12);
    }
}

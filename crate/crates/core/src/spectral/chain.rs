//! Reversible continuous-time chains in compressed sparse row form.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::rates::rate_kind;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::ln_sum;
use crate::spectral::state::{flip_mask, SpaceSpec, StateSpace, Subset, DEFAULT_STATE_CAP};

/// Relative tolerance of the detailed-balance check at build time.
pub const BALANCE_TOL: f64 = 1e-10;

/// Reversible generator: off-diagonal rates, exit rates and the stationary
/// law. `sym` holds `sqrt(r(i,j) r(j,i))`, the off-diagonal entries of the
/// symmetrised generator up to sign.
#[derive(Clone, Debug)]
pub struct ReversibleChain {
    log_weight: Vec<f64>,
    pi: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    sym: Vec<f64>,
    exit: Vec<f64>,
}

impl ReversibleChain {
    /// From unnormalised log stationary weights and per-row `(j, rate)`
    /// lists. Zero rates and self-loops are dropped; detailed balance is
    /// verified.
    pub fn from_rows(log_weight: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = log_weight.len();
        if rows.len() != n || n == 0 {
            return Err(Error::invalid("one row per state and at least one state"));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(j, r)| j != i && r > 0.0);
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::invalid(format!("duplicate transition {i} -> {}", w[0].0)));
                }
            }
            for (j, r) in row {
                if j >= n || !r.is_finite() {
                    return Err(Error::invalid(format!("bad transition {i} -> {j} with rate {r}")));
                }
                cols.push(j as u32);
                rates.push(r);
            }
            row_ptr.push(cols.len());
        }
        Self::from_csr(log_weight, row_ptr, cols, rates)
    }

    fn from_csr(log_weight: Vec<f64>, row_ptr: Vec<usize>, cols: Vec<u32>, rates: Vec<f64>) -> Result<Self> {
        let n = log_weight.len();
        let log_z = ln_sum(log_weight.iter().copied());
        let pi: Vec<f64> = log_weight.iter().map(|w| (w - log_z).exp()).collect();
        let exit: Vec<f64> = (0..n).map(|i| rates[row_ptr[i]..row_ptr[i + 1]].iter().sum()).collect();
        let mut chain = Self { log_weight, pi, row_ptr, cols, rates, sym: Vec::new(), exit };
        let mut sym = Vec::with_capacity(chain.rates.len());
        for i in 0..n {
            for k in chain.row_ptr[i]..chain.row_ptr[i + 1] {
                let j = chain.cols[k] as usize;
                let back = chain
                    .rate(j, i)
                    .ok_or_else(|| Error::Numerical(format!("transition {i} -> {j} has no reverse")))?;
                let fwd = chain.rates[k];
                // pi_i r_ij = pi_j r_ji in log form
                let lhs = chain.log_weight[i] + fwd.ln();
                let rhs = chain.log_weight[j] + back.ln();
                if (lhs - rhs).abs() > BALANCE_TOL * lhs.abs().max(1.0) {
                    return Err(Error::Numerical(format!("detailed balance fails on {i} <-> {j}")));
                }
                sym.push((fwd * back).sqrt());
            }
        }
        chain.sym = sym;
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn log_weight(&self) -> &[f64] {
        &self.log_weight
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn transitions(&self) -> usize {
        self.cols.len()
    }

    /// `(j, r(i, j))` for every transition out of `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k] as usize, self.rates[k]))
    }

    pub fn rate(&self, i: usize, j: usize) -> Option<f64> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        let pos = self.cols[range.clone()].binary_search(&(j as u32)).ok()?;
        Some(self.rates[range.start + pos])
    }

    /// Largest relative detailed-balance violation.
    pub fn balance_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for (j, r) in self.row(i) {
                let back = self.rate(j, i).unwrap_or(0.0);
                let (a, b) = (self.pi[i] * r, self.pi[j] * back);
                worst = worst.max((a - b).abs() / a.max(b));
            }
        }
        worst
    }

    /// `y = S x` with `S = D^{1/2} (-L) D^{-1/2}`, `D = diag(pi)`.
    pub fn sym_matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.len() {
            let mut acc = self.exit[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc -= self.sym[k] * x[self.cols[k] as usize];
            }
            y[i] = acc;
        }
    }

    /// Dense symmetrised generator.
    pub fn dense_symmetric(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.exit[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k] as usize)] = -self.sym[k];
            }
        }
        m
    }

    /// Dense generator `L` (rows sum to zero).
    pub fn dense_generator(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = -self.exit[i];
            for (j, r) in self.row(i) {
                m[(i, j)] = r;
            }
        }
        m
    }

    /// Gershgorin bound on the spectrum of `S`.
    pub fn spectral_radius_bound(&self) -> f64 {
        (0..self.len())
            .map(|i| self.exit[i] + self.sym[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Chain on the states with `keep[i]`, transitions leaving the set
    /// cancelled. Returns the chain and the kept original indices.
    pub fn restrict(&self, keep: &[bool]) -> Result<(ReversibleChain, Vec<usize>)> {
        let old: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        if old.is_empty() {
            return Err(Error::invalid("restriction to an empty set"));
        }
        let mut new_index = vec![usize::MAX; self.len()];
        for (k, &i) in old.iter().enumerate() {
            new_index[i] = k;
        }
        let rows = old
            .iter()
            .map(|&i| self.row(i).filter(|&(j, _)| keep[j]).map(|(j, r)| (new_index[j], r)).collect())
            .collect();
        let lw = old.iter().map(|&i| self.log_weight[i]).collect();
        Ok((ReversibleChain::from_rows(lw, rows)?, old))
    }

    /// Whether every state reaches every other.
    pub fn is_irreducible(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for (j, _) in self.row(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.len()
    }
}

/// How transition rates are assigned to admissible corner flips.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RateRule {
    /// Heat-bath rates with contact weight `lambda`.
    HeatBath { lambda: f64 },
    /// Rate 1/2 for every corner flip, uniform stationary law.
    Uniform,
}

/// Indexed state space plus its reversible generator.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    pub space: StateSpace,
    pub chain: ReversibleChain,
    pub rule: RateRule,
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    /// Indicator of a predicate on heights, as a state vector.
    pub fn indicator(&self, pred: impl Fn(&[i32]) -> bool) -> Vec<bool> {
        let mut h = Vec::new();
        self.space
            .codes()
            .iter()
            .map(|&c| {
                self.space.decode_into(c, &mut h);
                pred(&h)
            })
            .collect()
    }

    /// Per-state label from a function of heights.
    pub fn labels<T>(&self, f: impl Fn(&[i32]) -> T) -> Vec<T> {
        let mut h = Vec::new();
        self.space
            .codes()
            .iter()
            .map(|&c| {
                self.space.decode_into(c, &mut h);
                f(&h)
            })
            .collect()
    }
}

/// Generator of the corner-flip chain on an arbitrary path space.
pub fn build_generator_on(spec: SpaceSpec, rule: RateRule, cap: usize) -> Result<GeneratorMatrix> {
    let space = StateSpace::enumerate(spec, cap)?;
    if space.is_empty() {
        return Err(Error::invalid("empty state space"));
    }
    let n = space.spec().n;
    let ln_lambda = match rule {
        RateRule::HeatBath { lambda } => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::invalid(format!("lambda = {lambda}: must be > 0")));
            }
            lambda.ln()
        }
        RateRule::Uniform => 0.0,
    };
    let states = space.len();
    let mut row_ptr = Vec::with_capacity(states + 1);
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut log_weight = Vec::with_capacity(states);
    let mut h = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    for &code in space.codes() {
        space.decode_into(code, &mut h);
        log_weight.push(match rule {
            RateRule::HeatBath { .. } => h.iter().filter(|&&v| v == 0).count() as f64 * ln_lambda,
            RateRule::Uniform => 0.0,
        });
        let row_start = cols.len();
        for x in 1..n {
            if h[x - 1] != h[x + 1] {
                continue;
            }
            let rate = match rule {
                RateRule::HeatBath { lambda } => rate_kind(&h, x).value(lambda),
                RateRule::Uniform => 0.5,
            };
            if rate == 0.0 {
                continue;
            }
            if let Some(j) = space.index_of(code ^ flip_mask(n, x)) {
                cols.push(j as u32);
                rates.push(rate);
            }
        }
        // flips at increasing x do not give sorted targets
        let mut pairs: Vec<(u32, f64)> =
            cols[row_start..].iter().copied().zip(rates[row_start..].iter().copied()).collect();
        pairs.sort_by_key(|p| p.0);
        for (k, (c, r)) in pairs.into_iter().enumerate() {
            cols[row_start + k] = c;
            rates[row_start + k] = r;
        }
        row_ptr.push(cols.len());
    }
    let chain = ReversibleChain::from_csr(log_weight, row_ptr, cols, rates)?;
    Ok(GeneratorMatrix { space, chain, rule })
}

/// Heat-bath generator of the elevated ensemble restricted to `subset`.
pub fn build_generator(params: &ModelParams, subset: Subset, cap: usize) -> Result<GeneratorMatrix> {
    build_generator_on(SpaceSpec::elevated(params, subset), RateRule::HeatBath { lambda: params.lambda() }, cap)
}

/// Same with the default state cap.
pub fn build_generator_default(params: &ModelParams, subset: Subset) -> Result<GeneratorMatrix> {
    build_generator(params, subset, DEFAULT_STATE_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_zero_paths, Path};
    use crate::statics::partition::{partition_elevated, partition_zero};

    #[test]
    fn two_state_zero_chain() {
        let g = build_generator_on(SpaceSpec::zero(4), RateRule::HeatBath { lambda: 3.0 }, 10).unwrap();
        assert_eq!(g.len(), 2);
        let low = g.space.index_of_heights(&[0, 1, 0, 1, 0]).unwrap();
        let high = g.space.index_of_heights(&[0, 1, 2, 1, 0]).unwrap();
        assert_eq!(g.chain.rate(high, low), Some(0.75));
        assert_eq!(g.chain.rate(low, high), Some(0.25));
        let l = g.chain.dense_generator();
        for i in 0..2 {
            assert_eq!(l.row(i).sum(), 0.0);
        }
        assert_eq!(enumerate_zero_paths(4, 24).unwrap().len(), 2);
    }

    #[test]
    fn stationary_law_matches_statics() {
        let p = ModelParams::new(12, 0.2, 3.0).unwrap();
        let g = build_generator(&p, Subset::All, 10_000).unwrap();
        let log_z = partition_elevated(&p).unwrap().log_z;
        for i in 0..g.len() {
            let path = g.space.path(i).unwrap();
            let want = (path.contacts() as f64 * 3f64.ln() - log_z).exp();
            assert!((g.chain.pi()[i] - want).abs() < 1e-12);
        }
        // pi L = 0
        let l = g.chain.dense_generator();
        let pi = nalgebra::DVector::from_column_slice(g.chain.pi());
        assert!((l.transpose() * pi).amax() < 1e-14);
        assert!(g.chain.balance_violation() < 1e-12);
        assert!(g.chain.is_irreducible());
        let zero = build_generator_on(SpaceSpec::zero(10), RateRule::HeatBath { lambda: 2.0 }, 1000).unwrap();
        let z: f64 = partition_zero(2.0, 10).unwrap();
        let flat = zero.space.index_of_heights(Path::flat(10, 0).unwrap().heights()).unwrap();
        assert!((zero.chain.pi()[flat] - (6.0 * 2f64.ln() - z).exp()).abs() < 1e-12);
    }

    #[test]
    fn symmetrised_generator_is_symmetric() {
        let p = ModelParams::new(10, 0.2, 6.0).unwrap();
        let g = build_generator(&p, Subset::All, 10_000).unwrap();
        let s = g.chain.dense_symmetric();
        assert!((&s - s.transpose()).amax() < 1e-12);
    }

    #[test]
    fn restriction_cancels_exits() {
        let p = ModelParams::new(10, 0.2, 6.0).unwrap();
        let g = build_generator(&p, Subset::All, 10_000).unwrap();
        let pinned = g.indicator(|h| h.contains(&0));
        let (r, idx) = g.chain.restrict(&pinned).unwrap();
        let direct = build_generator(&p, Subset::Pinned, 10_000).unwrap();
        assert_eq!(r.len(), direct.len());
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(g.space.codes()[i], direct.space.codes()[k]);
            assert!((r.exit_rate(k) - direct.chain.exit_rate(k)).abs() < 1e-15);
        }
    }
}

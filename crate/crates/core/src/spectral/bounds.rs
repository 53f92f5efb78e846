//! Variational bounds on the spectral gap: Dirichlet forms and bottlenecks,
//! projection and restricted chains, the two-level decomposition bound and
//! the flux bound for one-dimensional chains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::chain::ReversibleChain;
use crate::spectral::eigen::{spectral_gap, GapReport};

/// `E(f) = 1/2 sum pi(i) r(i,j) (f(j) - f(i))^2`.
pub fn dirichlet_form(chain: &ReversibleChain, f: &[f64]) -> f64 {
    let pi = chain.pi();
    let mut e = 0.0;
    for i in 0..chain.len() {
        for (j, r) in chain.row(i) {
            e += pi[i] * r * (f[j] - f[i]).powi(2);
        }
    }
    0.5 * e
}

pub fn variance(chain: &ReversibleChain, f: &[f64]) -> f64 {
    let pi = chain.pi();
    let mean: f64 = f.iter().zip(pi).map(|(x, p)| x * p).sum();
    f.iter().zip(pi).map(|(x, p)| (x - mean).powi(2) * p).sum()
}

fn as_indicator(set: &[bool]) -> Vec<f64> {
    set.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect()
}

/// `Var(1_A) / E(1_A)`, a lower bound on the relaxation time.
pub fn bottleneck_ratio(chain: &ReversibleChain, set: &[bool]) -> Result<f64> {
    if set.len() != chain.len() {
        return Err(Error::invalid("indicator length differs from the state count"));
    }
    if set.iter().all(|&s| s == set[0]) {
        return Err(Error::invalid("constant test function: variance is zero"));
    }
    let f = as_indicator(set);
    let var = variance(chain, &f);
    Ok(var / dirichlet_form(chain, &f))
}

/// Block-aggregated chain.
#[derive(Clone, Debug)]
pub struct Projection {
    /// `pi_bar(i)`, the mass of block `i`.
    pub pi_bar: Vec<f64>,
    /// Dense `r_bar(i, j)`, zero on the diagonal.
    pub rates: Vec<Vec<f64>>,
    pub chain: ReversibleChain,
}

/// Projection onto the blocks `labels[i] in 0..blocks`:
/// `r_bar(i, j) = pi_bar(i)^{-1} sum_{x in i, y in j} pi(x) r(x, y)`.
pub fn projection_chain(chain: &ReversibleChain, labels: &[usize], blocks: usize) -> Result<Projection> {
    if labels.len() != chain.len() {
        return Err(Error::invalid("one label per state"));
    }
    if let Some(&bad) = labels.iter().find(|&&b| b >= blocks) {
        return Err(Error::invalid(format!("label {bad} outside 0..{blocks}")));
    }
    let pi = chain.pi();
    let mut pi_bar = vec![0.0; blocks];
    let mut flow = vec![vec![0.0; blocks]; blocks];
    for i in 0..chain.len() {
        let bi = labels[i];
        pi_bar[bi] += pi[i];
        for (j, r) in chain.row(i) {
            if labels[j] != bi {
                flow[bi][labels[j]] += pi[i] * r;
            }
        }
    }
    if let Some(empty) = pi_bar.iter().position(|&p| p == 0.0) {
        return Err(Error::invalid(format!("block {empty} is empty")));
    }
    let rates: Vec<Vec<f64>> = flow.iter().zip(&pi_bar).map(|(row, p)| row.iter().map(|f| f / p).collect()).collect();
    let rows = rates
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &r)| r > 0.0).map(|(j, &r)| (j, r)).collect())
        .collect();
    let projected = ReversibleChain::from_rows(pi_bar.iter().map(|p| p.ln()).collect(), rows)?;
    Ok(Projection { pi_bar, rates, chain: projected })
}

/// Chain restricted to one block, transitions leaving it cancelled.
pub fn restricted_chain(chain: &ReversibleChain, labels: &[usize], block: usize) -> Result<ReversibleChain> {
    let keep: Vec<bool> = labels.iter().map(|&b| b == block).collect();
    Ok(chain.restrict(&keep)?.0)
}

/// Gap of a chain, infinite for a single state.
fn gap_or_infinite(chain: &ReversibleChain) -> Result<f64> {
    if chain.len() == 1 {
        return Ok(f64::INFINITY);
    }
    if !chain.is_irreducible() {
        return Err(Error::invalid("restricted block is reducible"));
    }
    Ok(spectral_gap(chain)?.gap)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub block_sizes: Vec<usize>,
    pub bar_gap: f64,
    /// Gap of each restricted block; infinite for one-state blocks.
    pub block_gaps: Vec<f64>,
    /// Largest rate at which a single state leaves its block.
    pub gamma: f64,
    /// `min(bar/3, bar min_i gap_i / (bar + gamma))`.
    pub bound: f64,
    pub exact_gap: f64,
}

impl DecompositionReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.exact_gap >= self.bound - slack
    }
}

pub fn decomposition_bound(chain: &ReversibleChain, labels: &[usize], blocks: usize) -> Result<DecompositionReport> {
    if blocks < 2 {
        return Err(Error::invalid("decomposition needs at least two blocks"));
    }
    let bar = projection_chain(chain, labels, blocks)?;
    let bar_gap = spectral_gap(&bar.chain)?.gap;
    let mut block_sizes = vec![0; blocks];
    labels.iter().for_each(|&b| block_sizes[b] += 1);
    let block_gaps =
        (0..blocks).map(|b| gap_or_infinite(&restricted_chain(chain, labels, b)?)).collect::<Result<Vec<f64>>>()?;
    let gamma = (0..chain.len())
        .map(|i| chain.row(i).filter(|&(j, _)| labels[j] != labels[i]).map(|(_, r)| r).sum::<f64>())
        .fold(0.0, f64::max);
    let min_block = block_gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let second = if min_block.is_infinite() { f64::INFINITY } else { bar_gap * min_block / (bar_gap + gamma) };
    let bound = (bar_gap / 3.0).min(second);
    let exact_gap = spectral_gap(chain)?.gap;
    Ok(DecompositionReport { block_sizes, bar_gap, block_gaps, gamma, bound, exact_gap })
}

/// Flux constants of a chain whose states `0..=L` are in their natural
/// order: `alpha = min_n max(r(n, n-1), r(n-1, n))` over nearest
/// neighbours and the smallest `beta` with
/// `min(pi[0..=n], pi[n..]) <= beta pi(n)` for every `n`.
pub fn flux_constants(chain: &ReversibleChain) -> (f64, f64) {
    let n = chain.len();
    let alpha = (1..n)
        .map(|k| chain.rate(k, k - 1).unwrap_or(0.0).max(chain.rate(k - 1, k).unwrap_or(0.0)))
        .fold(f64::INFINITY, f64::min);
    let pi = chain.pi();
    let total: f64 = pi.iter().sum();
    let mut prefix = 0.0;
    let mut beta = 0.0f64;
    for k in 0..n {
        let suffix = total - prefix;
        prefix += pi[k];
        beta = beta.max(prefix.min(suffix) / pi[k]);
    }
    (alpha, beta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub alpha: f64,
    pub beta: f64,
    /// Number of states minus one.
    pub length: usize,
    /// `beta L / alpha`.
    pub bound: f64,
    pub t_rel: f64,
}

impl FluxReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.t_rel <= self.bound * (1.0 + slack)
    }
}

/// Verifies both flux hypotheses for the given constants, then compares
/// the exact relaxation time with `beta L / alpha`.
pub fn flux_bound(chain: &ReversibleChain, alpha: f64, beta: f64) -> Result<FluxReport> {
    let n = chain.len();
    if n < 2 {
        return Err(Error::invalid("flux bound needs at least two states"));
    }
    for k in 1..n {
        let q = chain.rate(k, k - 1).unwrap_or(0.0).max(chain.rate(k - 1, k).unwrap_or(0.0));
        if q < alpha {
            return Err(Error::Hypothesis { hypothesis: "nearest-neighbour rate >= alpha", index: k });
        }
    }
    let pi = chain.pi();
    let total: f64 = pi.iter().sum();
    let mut prefix = 0.0;
    for k in 0..n {
        let suffix = total - prefix;
        prefix += pi[k];
        // relative slack for the rounding in the running sums
        if prefix.min(suffix) > beta * pi[k] * (1.0 + 1e-12) {
            return Err(Error::Hypothesis { hypothesis: "tail mass <= beta pi(n)", index: k });
        }
    }
    let length = n - 1;
    let GapReport { t_rel, .. } = spectral_gap(chain)?;
    Ok(FluxReport { alpha, beta, length, bound: beta * length as f64 / alpha, t_rel })
}

/// Relabels arbitrary ordered keys to `0..k` in ascending order.
pub fn dense_labels<T: Ord + Clone>(keys: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut distinct: Vec<T> = keys.to_vec();
    distinct.sort();
    distinct.dedup();
    let labels = keys.iter().map(|k| distinct.binary_search(k).expect("key present")).collect();
    (labels, distinct)
}

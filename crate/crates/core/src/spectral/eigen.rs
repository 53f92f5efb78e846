//! Smallest non-zero eigenvalue of `-L` for reversible chains.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::chain::ReversibleChain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Use the dense solver up to this many states.
    pub dense_limit: usize,
    /// Residual tolerance of the iterative solver.
    pub tol: f64,
    pub basis: usize,
    pub keep: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { dense_limit: 500, tol: 1e-10, basis: 20, keep: 8, max_restarts: 2000, seed: 0x9E37 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: f64,
    pub t_rel: f64,
    pub method: EigenMethod,
    pub states: usize,
    /// `||(-L) f - gap f||_pi` for the returned eigenfunction.
    pub residual: f64,
    /// Eigenfunction `f` of `-L`, normalised in `L^2(pi)`.
    #[serde(skip)]
    pub eigenfunction: Vec<f64>,
    pub iterations: usize,
}

pub fn spectral_gap(chain: &ReversibleChain) -> Result<GapReport> {
    spectral_gap_with(chain, &EigenOptions::default())
}

pub fn spectral_gap_with(chain: &ReversibleChain, opts: &EigenOptions) -> Result<GapReport> {
    let n = chain.len();
    if n < 2 {
        return Err(Error::invalid("a single-state chain has no spectral gap"));
    }
    if !chain.is_irreducible() {
        return Err(Error::invalid("chain is reducible: the zero eigenvalue is not simple"));
    }
    let (gap, v, method, iterations) = if n <= opts.dense_limit {
        let (g, v) = dense_gap(chain)?;
        (g, v, EigenMethod::Dense, 0)
    } else {
        let (g, v, it) = lanczos_gap(chain, opts)?;
        (g, v, EigenMethod::Lanczos, it)
    };
    let mut sv = vec![0.0; n];
    chain.sym_matvec(&v, &mut sv);
    let residual = sv.iter().zip(&v).map(|(a, b)| (a - gap * b).powi(2)).sum::<f64>().sqrt();
    let eigenfunction = v.iter().zip(chain.pi()).map(|(x, p)| x / p.sqrt()).collect();
    Ok(GapReport { gap, t_rel: 1.0 / gap, method, states: n, residual, eigenfunction, iterations })
}

/// Every eigenvalue of `-L`, ascending.
pub fn dense_spectrum(chain: &ReversibleChain) -> Vec<f64> {
    let eig = SymmetricEigen::new(chain.dense_symmetric());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

fn dense_gap(chain: &ReversibleChain) -> Result<(f64, Vec<f64>)> {
    if chain.len() == 2 {
        // closed form: -L has eigenvalues 0 and q01 + q10
        let rate = |i, j| chain.rate(i, j).unwrap_or(0.0);
        let pi = chain.pi();
        return Ok((rate(0, 1) + rate(1, 0), vec![pi[1].sqrt(), -pi[0].sqrt()]));
    }
    let eig = SymmetricEigen::new(chain.dense_symmetric());
    let mut order: Vec<usize> = (0..chain.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let gap = eig.eigenvalues[order[1]];
    if !(gap > 0.0) {
        return Err(Error::Numerical(format!("second eigenvalue {gap} not positive")));
    }
    Ok((gap, eig.eigenvectors.column(order[1]).iter().copied().collect()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // independent partial sums let the loop vectorise
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (xa, xb) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out[k] = sum_j coeffs[k][j] basis[j]`, in row blocks so that each basis
/// vector is streamed once.
fn combine(basis: &[Vec<f64>], coeffs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    const BLOCK: usize = 2048;
    let n = basis[0].len();
    let mut out = vec![vec![0.0; n]; coeffs.len()];
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        for (j, v) in basis.iter().enumerate() {
            for (u, y) in out.iter_mut().zip(coeffs) {
                axpy(y[j], &v[start..end], &mut u[start..end]);
            }
        }
    }
    out
}

/// Orthogonalise `w` against `null` and `basis` by classical Gram-Schmidt
/// applied twice; returns the accumulated coefficients. Work proceeds in row
/// blocks so that `w` stays in cache.
fn orthogonalise(w: &mut [f64], basis: &[Vec<f64>], null: &[f64]) -> Vec<f64> {
    const BLOCK: usize = 2048;
    let n = w.len();
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        let c0 = dot(null, w);
        axpy(-c0, null, w);
        let mut pass = vec![0.0; basis.len()];
        for start in (0..n).step_by(BLOCK) {
            let end = (start + BLOCK).min(n);
            for (c, v) in pass.iter_mut().zip(basis) {
                *c += dot(&v[start..end], &w[start..end]);
            }
        }
        for start in (0..n).step_by(BLOCK) {
            let end = (start + BLOCK).min(n);
            for (c, v) in pass.iter().zip(basis) {
                axpy(-c, &v[start..end], &mut w[start..end]);
            }
        }
        coef.iter_mut().zip(&pass).for_each(|(a, b)| *a += b);
    }
    coef
}

/// Thick-restart Lanczos for the top of `sigma I - S` on the complement of
/// `sqrt(pi)`, with full reorthogonalisation.
fn lanczos_gap(chain: &ReversibleChain, opts: &EigenOptions) -> Result<(f64, Vec<f64>, usize)> {
    let n = chain.len();
    let sigma = chain.spectral_radius_bound();
    let null: Vec<f64> = chain.pi().iter().map(|p| p.sqrt()).collect();
    let null_norm = norm(&null);
    let null: Vec<f64> = null.iter().map(|x| x / null_norm).collect();
    let m = opts.basis.min(n - 1).max(2);
    let keep = opts.keep.min(m - 1).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    orthogonalise(&mut v0, &[], &null);
    let nv = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut h = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut w = vec![0.0; n];
    let mut matvecs = 0;
    let mut from = 0;
    for _restart in 0..opts.max_restarts {
        for j in from..m {
            chain.sym_matvec(&basis[j], &mut w);
            matvecs += 1;
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi = sigma * vi - *wi;
            }
            let coef = orthogonalise(&mut w, &basis, &null);
            for (i, c) in coef.iter().enumerate() {
                h[(i, j)] = *c;
                h[(j, i)] = *c;
            }
            let beta = norm(&w);
            h[(j + 1, j)] = beta;
            h[(j, j + 1)] = beta;
            if beta < 1e-300 {
                return Err(Error::Convergence("Lanczos breakdown: invariant subspace found".into()));
            }
            basis.push(w.iter().map(|x| x / beta).collect());
        }
        let hm = h.view((0, 0), (m, m)).into_owned();
        let hm = (&hm + hm.transpose()) * 0.5;
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let coupling: Vec<f64> = (0..m).map(|j| h[(m, j)]).collect();
        let resid = |col: usize| dot(&coupling, eig.eigenvectors.column(col).as_slice()).abs();
        let top = order[0];
        if resid(top) <= opts.tol {
            let y = eig.eigenvectors.column(top);
            let mut x = vec![0.0; n];
            for (k, v) in basis.iter().take(m).enumerate() {
                axpy(y[k], v, &mut x);
            }
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            return Ok((sigma - eig.eigenvalues[top], x, matvecs));
        }
        // thick restart on the leading Ritz vectors
        let cols: Vec<usize> = order.iter().take(keep).copied().collect();
        let ys: Vec<Vec<f64>> = cols.iter().map(|&c| eig.eigenvectors.column(c).iter().copied().collect()).collect();
        let mut new_basis = combine(&basis[..m], &ys);
        let mut new_h = DMatrix::<f64>::zeros(m + 1, m + 1);
        for (k, &col) in cols.iter().enumerate() {
            new_h[(k, k)] = eig.eigenvalues[col];
            let c = dot(&coupling, &ys[k]);
            new_h[(k, keep)] = c;
            new_h[(keep, k)] = c;
        }
        new_basis.push(basis.swap_remove(m));
        basis = new_basis;
        h = new_h;
        from = keep;
    }
    Err(Error::Convergence(format!("Lanczos did not converge after {} restarts", opts.max_restarts)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::rng::stream;
    use crate::spectral::chain::{build_generator, build_generator_on, RateRule};
    use crate::spectral::state::{SpaceSpec, Subset};

    fn two_state(p: f64, q: f64) -> ReversibleChain {
        // pi proportional to (q, p)
        ReversibleChain::from_rows(vec![q.ln(), p.ln()], vec![vec![(1, p)], vec![(0, q)]]).unwrap()
    }

    #[test]
    fn two_state_gap() {
        let r = spectral_gap(&two_state(0.3, 1.7)).unwrap();
        assert_eq!(r.gap, 0.3 + 1.7);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn single_state_rejected() {
        let c = ReversibleChain::from_rows(vec![0.0], vec![vec![]]).unwrap();
        assert!(spectral_gap(&c).is_err());
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        for (n, a, lambda) in [(10usize, 0.2, 6.0), (12, 0.3, 2.0), (12, 0.2, 8.0)] {
            let p = ModelParams::new(n, a, lambda).unwrap();
            let g = build_generator(&p, Subset::All, 100_000).unwrap();
            let dense =
                spectral_gap_with(&g.chain, &EigenOptions { dense_limit: usize::MAX, ..Default::default() }).unwrap();
            let lanczos = spectral_gap_with(&g.chain, &EigenOptions { dense_limit: 0, ..Default::default() }).unwrap();
            assert_eq!(lanczos.method, EigenMethod::Lanczos);
            assert!((dense.gap - lanczos.gap).abs() < 1e-9 * dense.gap, "{} vs {}", dense.gap, lanczos.gap);
            assert!(lanczos.residual < 1e-9 && dense.residual < 1e-9);
        }
    }

    #[test]
    fn rayleigh_quotients_bound_the_gap() {
        let p = ModelParams::new(10, 0.2, 6.0).unwrap();
        let g = build_generator(&p, Subset::All, 10_000).unwrap();
        let r = spectral_gap(&g.chain).unwrap();
        let mut rng = stream(9, 0, 0);
        let quotient = |f: &[f64]| {
            let c = &g.chain;
            let mean: f64 = f.iter().zip(c.pi()).map(|(a, b)| a * b).sum();
            let var: f64 = f.iter().zip(c.pi()).map(|(a, b)| (a - mean).powi(2) * b).sum();
            let mut e = 0.0;
            for i in 0..c.len() {
                for (j, rate) in c.row(i) {
                    e += 0.5 * c.pi()[i] * rate * (f[j] - f[i]).powi(2);
                }
            }
            e / var
        };
        for _ in 0..100 {
            let f: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
            assert!(quotient(&f) >= r.gap * (1.0 - 1e-12));
        }
        assert!((quotient(&r.eigenfunction) - r.gap).abs() < 1e-8);
    }

    #[test]
    fn unconstrained_two_step_corner_flip() {
        let g =
            build_generator_on(SpaceSpec::envelope(&[0, -1, 0], &[0, 1, 0]).unwrap(), RateRule::Uniform, 10).unwrap();
        let r = spectral_gap(&g.chain).unwrap();
        assert_eq!(r.gap, 1.0);
        assert!(r.residual < 1e-15);
    }
}

//! Covariance model of the discretized Gaussian limit `G_P` and sampling of
//! `Z~ = max_j (B_j + G_P f_j)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{input, Error, Result};
use crate::function_class::Net;
use crate::population::{population_moments, Distribution, PopulationOptions};
use crate::process_engine::{ProcessKind, SupSample};
use crate::rng;

/// Diagonal jitter ladder, in units of `trace / N`.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4];

/// Pivoted lower-triangular factor: with `P` the permutation,
/// `(P A P^T) ~= L L^T` where `L` is `N x rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub perm: Vec<usize>,
    pub rank: usize,
    /// Row-major `N x rank`, rows in pivot order.
    pub l: Vec<f64>,
}

impl Factor {
    /// `L L^T` mapped back to the original index order.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.perm.len();
        let r = self.rank;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..r).map(|m| self.l[i * r + m] * self.l[j * r + m]).sum();
                out[self.perm[i] * n + self.perm[j]] = s;
            }
        }
        out
    }
}

/// Outer-product Cholesky with full diagonal pivoting. Pivots at or below
/// `tol` end the factorization; the trailing Schur complement must then be
/// negligible. Returns the most negative offending value on failure.
fn pivoted_cholesky(a: &[f64], n: usize, tol: f64) -> std::result::Result<Factor, f64> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    // columns of L, stored per original row index until the end
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut rank = 0;
    for k in 0..n {
        let (p, &dp) = d[k..]
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, v)| (i + k, v))
            .expect("nonempty");
        if dp <= tol {
            break;
        }
        perm.swap(k, p);
        d.swap(k, p);
        let pk = perm[k];
        let lkk = dp.sqrt();
        let mut col = vec![0.0; n];
        col[pk] = lkk;
        for &pi in &perm[k + 1..] {
            let s: f64 = cols.iter().map(|c| c[pi] * c[pk]).sum();
            col[pi] = (a[pi * n + pk] - s) / lkk;
        }
        for i in k + 1..n {
            let v = col[perm[i]];
            d[i] -= v * v;
        }
        cols.push(col);
        rank += 1;
    }
    // trailing block must be numerically zero
    let mut worst = 0.0f64;
    for i in rank..n {
        for j in rank..n {
            let (pi, pj) = (perm[i], perm[j]);
            let s: f64 = cols.iter().map(|c| c[pi] * c[pj]).sum();
            let res = a[pi * n + pj] - s;
            if res.abs() > worst.abs() {
                worst = res;
            }
        }
    }
    if worst.abs() > 10.0 * tol {
        return Err(if worst < 0.0 { worst } else { -worst });
    }
    let mut l = vec![0.0; n * rank];
    for i in 0..n {
        for (m, c) in cols.iter().enumerate() {
            l[i * rank + m] = c[perm[i]];
        }
    }
    Ok(Factor { perm, rank, l })
}

/// Result of [`psd_repair`].
#[derive(Clone, Debug)]
pub struct Repaired {
    /// `cov + jitter * I`.
    pub cov: Vec<f64>,
    pub jitter: f64,
    pub factor: Factor,
}

fn check_square_symmetric(cov: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 || cov.len() != n * n {
        return input(format!("covariance must be a nonempty {n}x{n} matrix"));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return input("covariance has non-finite entries");
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut sym = cov.to_vec();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (cov[i * n + j], cov[j * n + i]);
            if (a - b).abs() > 1e-10 * scale {
                return input(format!("covariance not symmetric at ({i},{j})"));
            }
            let m = 0.5 * (a + b);
            sym[i * n + j] = m;
            sym[j * n + i] = m;
        }
    }
    Ok(sym)
}

/// Adds the smallest ladder jitter (times `trace / N`) that lets the pivoted
/// factorization succeed.
pub fn psd_repair(cov: &[f64], n: usize) -> Result<Repaired> {
    let sym = check_square_symmetric(cov, n)?;
    let trace: f64 = (0..n).map(|i| sym[i * n + i]).sum();
    let unit = if trace > 0.0 { trace / n as f64 } else { 1.0 };
    let max_diag = (0..n).map(|i| sym[i * n + i]).fold(0.0f64, f64::max);
    let mut worst = 0.0;
    for step in JITTER_LADDER {
        let jitter = step * unit;
        let mut shifted = sym.clone();
        for i in 0..n {
            shifted[i * n + i] += jitter;
        }
        let tol = 1e-12 * (max_diag + jitter).max(f64::MIN_POSITIVE);
        match pivoted_cholesky(&shifted, n, tol) {
            Ok(factor) => {
                return Ok(Repaired {
                    cov: shifted,
                    jitter,
                    factor,
                })
            }
            Err(v) => worst = v,
        }
    }
    Err(Error::Numerical(format!(
        "factorization failed at maximal jitter {:.3e}; most negative residual {worst:.3e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1] * unit
    )))
}

/// Law of the discretized Gaussian process: mean (the drift) plus
/// covariance, factorized.
#[derive(Clone, Debug)]
pub struct CovarianceModel {
    pub mean: Vec<f64>,
    /// Row-major `N x N`, symmetrized exactly, before jitter.
    pub cov: Vec<f64>,
    pub factor: Factor,
    pub jitter_applied: f64,
}

impl CovarianceModel {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let n = mean.len();
        let sym = check_square_symmetric(&cov, n)?;
        let rep = psd_repair(&sym, n)?;
        Ok(Self {
            mean,
            cov: sym,
            factor: rep.factor,
            jitter_applied: rep.jitter,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Centered draw `g = L w` in original index order.
    pub fn draw_centered<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let r = self.factor.rank;
        let w: Vec<f64> = (0..r).map(|_| rng.sample(StandardNormal)).collect();
        for (i, &pi) in self.factor.perm.iter().enumerate() {
            let row = &self.factor.l[i * r..(i + 1) * r];
            out[pi] = row.iter().zip(&w).map(|(a, b)| a * b).sum();
        }
    }

    fn sup_value(&self, seed: u64) -> f64 {
        let mut r = rng::rng_from(seed);
        let mut g = vec![0.0; self.dim()];
        self.draw_centered(&mut r, &mut g);
        g.iter()
            .zip(&self.mean)
            .map(|(a, b)| a + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `count` independent draws of `Z~`; draw `k` uses the stream
    /// `(seed, k)`.
    pub fn sample_sups(&self, count: usize, seed: u64) -> Vec<f64> {
        (0..count)
            .into_par_iter()
            .map(|k| self.sup_value(rng::split_seed(seed, &[rng::TAG_GAUSS, k as u64])))
            .collect()
    }

    /// Same law with coordinates reordered: new index `i` is old `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.dim();
        let mean = order.iter().map(|&i| self.mean[i]).collect();
        let mut cov = vec![0.0; n * n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                cov[a * n + b] = self.cov[i * n + j];
            }
        }
        Self::new(mean, cov)
    }
}

/// `Cov(f_j(X), f_k(X))` for the net under the population, with the drift as
/// mean.
pub fn estimate_covariance(
    net: &Net,
    population: &Distribution,
    opts: &PopulationOptions,
) -> Result<CovarianceModel> {
    let moments = population_moments(net, population, opts)?;
    CovarianceModel::new(net.drift.clone(), moments.cov)
}

pub fn sample_gaussian_sup(model: &CovarianceModel, seed: u64) -> SupSample {
    SupSample {
        value: model.sup_value(seed),
        kind: ProcessKind::Ztilde,
        conditioning_seed: None,
        weight_seed: Some(seed),
    }
}

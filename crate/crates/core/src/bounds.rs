//! Explicit quantitative expressions: the complexity parameter `K_n`, the
//! coupling rates, third-moment terms, covariance discrepancy, and the
//! anti-concentration bounds for Gaussian maxima.
//!
//! Universal constants are never included; every function returns the
//! constant-free expression.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::gaussian_kernel::CovarianceModel;
use crate::rng;

/// Constants of the moment and entropy assumptions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    /// VC exponent, `>= 1`.
    pub v: f64,
    /// VC constant, `>= e`.
    pub a_const: f64,
    pub b: f64,
    pub sigma: f64,
    /// Envelope moment order, `>= 4`.
    pub q: f64,
    pub n: u64,
    /// `N_B(eta)`, `>= 1`.
    pub n_b_eta: f64,
    pub eta: f64,
    /// Probability level in `(0, 1)`.
    pub gamma: f64,
}

impl ClassParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Input(m.to_string()));
        if !(self.v >= 1.0) {
            return bad("v must be >= 1");
        }
        if !(self.a_const >= std::f64::consts::E) {
            return bad("A must be >= e");
        }
        if !(self.sigma > 0.0 && self.b >= self.sigma) {
            return bad("need b >= sigma > 0");
        }
        if !(self.q >= 4.0) {
            return bad("q must be >= 4");
        }
        if self.n == 0 {
            return bad("n must be >= 1");
        }
        if !(self.n_b_eta >= 1.0) {
            return bad("N_B(eta) must be >= 1");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be > 0");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0,1)");
        }
        Ok(())
    }

    pub fn with_n(self, n: u64) -> Self {
        Self { n, ..self }
    }
}

/// `K_n = log N_B(eta) + v (log n  v  log(A b / sigma))`.
pub fn compute_kn(p: &ClassParams) -> f64 {
    let n = p.n as f64;
    p.n_b_eta.ln() + p.v * n.ln().max((p.a_const * p.b / p.sigma).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    /// Empirical process coupling.
    D1,
    /// Multiplier bootstrap coupling.
    D2,
    /// Empirical bootstrap coupling.
    D3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateValue {
    pub value: f64,
    pub kn: f64,
    /// `K_n^3 <= n` for `D1`/`D3`, `K_n <= n` for `D2`.
    pub side_condition_ok: bool,
}

/// Evaluates a rate with `K_n` supplied directly (used by oracles and test
/// hooks where `gamma = 1` is needed).
pub fn delta_rate_with_kn(p: &ClassParams, kn: f64, which: Rate) -> RateValue {
    let n = p.n as f64;
    let (b, s, q, g) = (p.b, p.sigma, p.q, p.gamma);
    let t_lin = |gpow: f64| b * kn / (g.powf(gpow) * n.powf(0.5 - 1.0 / q));
    let t_sixth = (b * s * s * kn * kn).cbrt() / (g.cbrt() * n.powf(1.0 / 6.0));
    let t_quarter = (b * s * kn.powf(1.5)).sqrt() / (g.powf(1.0 + 1.0 / q) * n.powf(0.25));
    let (value, side) = match which {
        Rate::D1 => (t_lin(1.0 / q) + t_sixth, kn.powi(3) <= n),
        Rate::D2 => (t_lin(1.0 + 1.0 / q) + t_quarter, kn <= n),
        Rate::D3 => (t_lin(1.0 + 1.0 / q) + t_sixth + t_quarter, kn.powi(3) <= n),
    };
    RateValue {
        value,
        kn,
        side_condition_ok: side,
    }
}

pub fn delta_rate(p: &ClassParams, which: Rate) -> RateValue {
    delta_rate_with_kn(p, compute_kn(p), which)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThirdMoments {
    pub l_n: f64,
    pub m_nx: f64,
}

/// Plug-in `L_n` and `M_{n,X}(delta)` for an `n x p` matrix of centered rows.
pub fn third_moment_terms(rows: &[Vec<f64>], delta: f64) -> Result<ThirdMoments> {
    if !(delta > 0.0) {
        return input("delta must be > 0");
    }
    let n = rows.len();
    let p = rows.first().map(Vec::len).unwrap_or(0);
    if n == 0 || rows.iter().any(|r| r.len() != p) {
        return input("need a nonempty rectangular matrix");
    }
    if p < 2 {
        return input("p must be >= 2");
    }
    let threshold = delta * (n as f64).sqrt() / (p as f64).ln();
    third_moment_terms_at(rows, threshold)
}

/// Same, with the truncation level `delta sqrt(n) / log p` supplied.
pub fn third_moment_terms_at(rows: &[Vec<f64>], threshold: f64) -> Result<ThirdMoments> {
    let n = rows.len();
    let p = rows.first().map(Vec::len).unwrap_or(0);
    if n == 0 || p == 0 {
        return input("need a nonempty matrix");
    }
    let nf = n as f64;
    let l_n = (0..p)
        .map(|j| rows.iter().map(|r| r[j].abs().powi(3)).sum::<f64>() / nf)
        .fold(0.0, f64::max);
    let m_nx = rows
        .iter()
        .map(|r| {
            let mx = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if mx > threshold {
                mx.powi(3)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / nf;
    Ok(ThirdMoments { l_n, m_nx })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

/// Monte Carlo `E[max_j |Y_j|^3 1{max_j |Y_j| > threshold}]` with
/// `Y ~ N(0, cov)`.
pub fn gaussian_tail_at(model: &CovarianceModel, threshold: f64, draws: usize, seed: u64) -> Result<McEstimate> {
    if draws < 2 {
        return input("need at least 2 draws");
    }
    let p = model.dim();
    let vals: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, &[k as u64]);
            let mut y = vec![0.0; p];
            model.draw_centered(&mut r, &mut y);
            let mx = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if mx > threshold {
                mx.powi(3)
            } else {
                0.0
            }
        })
        .collect();
    let m = draws as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(McEstimate {
        value: mean,
        se: (var / m).sqrt(),
    })
}

/// `M_{n,Y}(delta)` for identically distributed Gaussian rows.
pub fn gaussian_tail_term(
    model: &CovarianceModel,
    delta: f64,
    n: usize,
    mc_draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(delta > 0.0) || n == 0 {
        return input("need delta > 0 and n >= 1");
    }
    if mc_draws < 10_000 {
        return input("mc_draws must be >= 10^4");
    }
    let p = model.dim();
    if p < 2 {
        return input("p must be >= 2");
    }
    let threshold = delta * (n as f64).sqrt() / (p as f64).ln();
    gaussian_tail_at(model, threshold, mc_draws, seed)
}

/// `max_{j,k} |covX_jk - covY_jk|`.
pub fn cov_discrepancy(cov_x: &[f64], cov_y: &[f64]) -> Result<f64> {
    if cov_x.len() != cov_y.len() {
        return input("covariance shapes differ");
    }
    Ok(cov_x
        .iter()
        .zip(cov_y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `(2 eps / sigma_min) (sqrt(2 log p) + 2)`.
pub fn nazarov_density_bound(p: usize, underline_sigma: f64, epsilon: f64) -> Result<f64> {
    if p == 0 || !(underline_sigma > 0.0) || !(epsilon > 0.0) {
        return input("need p >= 1, sigma > 0, epsilon > 0");
    }
    Ok(2.0 * epsilon / underline_sigma * ((2.0 * (p as f64).ln()).sqrt() + 2.0))
}

/// `min_r { 2 (eps + phi(delta) + r delta)/sigma (sqrt(2 log N) + 2) + exp(-r^2/2) }`
/// at a single `delta`.
pub fn anticoncentration_bound(
    underline_sigma: f64,
    epsilon: f64,
    phi_delta: f64,
    cover_n: usize,
    delta: f64,
    r_grid: &[f64],
) -> Result<f64> {
    if !(underline_sigma > 0.0) || epsilon < 0.0 || phi_delta < 0.0 || !(delta > 0.0) {
        return input("need sigma > 0, delta > 0, epsilon and phi nonnegative");
    }
    if cover_n == 0 || r_grid.is_empty() || r_grid.iter().any(|r| !(*r > 0.0)) {
        return input("need N >= 1 and a nonempty positive r grid");
    }
    let root = (2.0 * (cover_n as f64).ln()).sqrt() + 2.0;
    Ok(r_grid
        .iter()
        .map(|&r| {
            2.0 / underline_sigma * (epsilon + phi_delta + r * delta) * root + (-r * r / 2.0).exp()
        })
        .fold(f64::INFINITY, f64::min))
}

/// Monte Carlo `sup_t P(|max_j X_j - t| <= eps)` over a grid of `t` spanning
/// the central range of the sample; returns the maximizing estimate with
/// its binomial standard error.
pub fn levy_concentration_mc(maxima: &[f64], epsilon: f64, grid_points: usize) -> Result<McEstimate> {
    if maxima.is_empty() || grid_points < 2 {
        return input("need a sample and at least two grid points");
    }
    let mut s = maxima.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let count_within = |t: f64| {
        let a = s.partition_point(|&v| v < t - epsilon);
        let b = s.partition_point(|&v| v <= t + epsilon);
        (b - a) as f64 / m
    };
    let best = (0..grid_points)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_points - 1) as f64)
        .map(count_within)
        .fold(0.0, f64::max);
    Ok(McEstimate {
        value: best,
        se: (best * (1.0 - best) / m).sqrt(),
    })
}

/// Draws `count` maxima of `N(mean, cov)` (helper for concentration checks).
pub fn gaussian_maxima(model: &CovarianceModel, count: usize, seed: u64) -> Vec<f64> {
    model.sample_sups(count, seed)
}

/// Random Gaussian configuration for concentration checks: `p x p`
/// covariance with diagonal at least `min_var`, arbitrary mean.
pub fn random_gaussian_config<R: Rng + ?Sized>(
    r: &mut R,
    p: usize,
    min_var: f64,
) -> Result<CovarianceModel> {
    let k = p.max(1);
    let a: Vec<f64> = (0..p * k).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut cov = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            cov[i * p + j] = (0..k).map(|m| a[i * k + m] * a[j * k + m]).sum::<f64>() / k as f64;
        }
        cov[i * p + i] += min_var;
    }
    let mean = (0..p).map(|_| r.random_range(-0.5..0.5)).collect();
    CovarianceModel::new(mean, cov)
}

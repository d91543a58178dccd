//! Probability that a normalized sum lands in a closed convex set, through
//! the support-function representation
//! `x in A  <=>  sup_v (v.x - V_A(v)) <= 0` over a sphere net.
//!
//! The sum is centered at the population mean of `X`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::function_class::sphere_net;
use crate::gaussian_kernel::CovarianceModel;
use crate::population::{DataSample, Distribution};
use crate::rng::{self, TAG_DATA, TAG_GAUSS, TAG_WEIGHTS};

const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexKind {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x : normal.x <= offset}`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// `{x : normals[k].x <= offsets[k] for all k}`; dimension at most 3.
    Polytope { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexSetSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: ConvexKind,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl ConvexSetSpec {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Self {
            dim: center.len(),
            kind: ConvexKind::Ball { center, radius },
        }
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Self {
        Self {
            dim: normal.len(),
            kind: ConvexKind::Halfspace { normal, offset },
        }
    }

    pub fn cube(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self {
            dim: lo.len(),
            kind: ConvexKind::Box { lo, hi },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if d == 0 {
            return bad("set dimension must be >= 1");
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.kind {
            ConvexKind::Ball { center, radius } => {
                if center.len() != d || !finite(center) {
                    return bad("ball center must be finite with length dim");
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return bad("ball radius must be > 0");
                }
            }
            ConvexKind::Box { lo, hi } => {
                if lo.len() != d || hi.len() != d || !finite(lo) || !finite(hi) {
                    return bad("box bounds must be finite with length dim");
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return bad("box needs lo <= hi componentwise");
                }
            }
            ConvexKind::Halfspace { normal, offset } => {
                if normal.len() != d || !finite(normal) || !offset.is_finite() {
                    return bad("halfspace normal must be finite with length dim");
                }
                if norm(normal) == 0.0 {
                    return bad("halfspace normal must be nonzero");
                }
            }
            ConvexKind::Polytope { normals, offsets } => {
                if d > 3 {
                    return bad("polytopes are supported for dim <= 3");
                }
                if normals.is_empty() || normals.len() != offsets.len() {
                    return bad("polytope needs matching nonempty normals and offsets");
                }
                if normals.iter().any(|a| a.len() != d || !finite(a) || norm(a) == 0.0)
                    || !finite(offsets)
                {
                    return bad("polytope normals must be finite, nonzero, length dim");
                }
            }
        }
        Ok(())
    }

    pub fn is_halfspace(&self) -> bool {
        matches!(self.kind, ConvexKind::Halfspace { .. })
    }

    /// Membership test straight from the definition.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            ConvexKind::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>() <= radius * radius
            }
            ConvexKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h),
            ConvexKind::Halfspace { normal, offset } => dot(normal, x) <= *offset,
            ConvexKind::Polytope { normals, offsets } => {
                normals.iter().zip(offsets).all(|(a, b)| dot(a, x) <= *b)
            }
        }
    }
}

/// `V_A(v) = sup_{x in A} v.x` for a unit `v`; `+inf` when `A` is unbounded
/// in direction `v`.
pub fn support_function(set: &ConvexSetSpec, v: &[f64]) -> Result<f64> {
    if v.len() != set.dim {
        return input("direction has the wrong dimension");
    }
    if (norm(v) - 1.0).abs() > UNIT_TOL {
        return input("direction must have unit norm");
    }
    set.validate()?;
    Ok(support_value(set, v))
}

/// `sup_{x in A} v.x` for any `v`, without the unit-norm check.
pub fn support_value(set: &ConvexSetSpec, v: &[f64]) -> f64 {
    match &set.kind {
        ConvexKind::Ball { center, radius } => dot(v, center) + radius * norm(v),
        ConvexKind::Box { lo, hi } => v
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(vj, (l, h))| (vj * l).max(vj * h))
            .sum(),
        ConvexKind::Halfspace { normal, offset } => {
            let (nv, nn) = (norm(v), norm(normal));
            if nv == 0.0 {
                return 0.0;
            }
            let aligned = v
                .iter()
                .zip(normal)
                .all(|(a, b)| (a / nv - b / nn).abs() <= UNIT_TOL);
            if aligned {
                offset * nv / nn
            } else {
                f64::INFINITY
            }
        }
        ConvexKind::Polytope { normals, offsets } => polytope_support(normals, offsets, v),
    }
}

/// Solves the dual `min { b.l : A^T l = v, l >= 0 }` by enumerating basic
/// solutions on at most `dim` constraints. No dual-feasible basis means the
/// primal is unbounded in `v`. The polytope is assumed nonempty.
fn polytope_support(normals: &[Vec<f64>], offsets: &[f64], v: &[f64]) -> f64 {
    if norm(v) == 0.0 {
        return 0.0;
    }
    let m = normals.len();
    let d = v.len();
    let mut best = f64::INFINITY;
    let mut subset = Vec::with_capacity(d);
    fn visit(
        start: usize,
        m: usize,
        d: usize,
        subset: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if !subset.is_empty() {
            f(subset);
        }
        if subset.len() == d {
            return;
        }
        for k in start..m {
            subset.push(k);
            visit(k + 1, m, d, subset, f);
            subset.pop();
        }
    }
    let scale = norm(v);
    visit(0, m, d, &mut subset, &mut |s: &[usize]| {
        if let Some(lambda) = solve_gram(normals, s, v) {
            let resid: Vec<f64> = (0..d)
                .map(|c| s.iter().zip(&lambda).map(|(&k, l)| normals[k][c] * l).sum::<f64>() - v[c])
                .collect();
            if norm(&resid) <= 1e-9 * scale && lambda.iter().all(|&l| l >= -1e-12) {
                let val: f64 = s.iter().zip(&lambda).map(|(&k, l)| offsets[k] * l.max(0.0)).sum();
                best = best.min(val);
            }
        }
    });
    best
}

/// Least-squares coefficients of `v` on the normals in `s` through the Gram
/// system; `None` when those normals are linearly dependent.
fn solve_gram(normals: &[Vec<f64>], s: &[usize], v: &[f64]) -> Option<Vec<f64>> {
    let k = s.len();
    let mut a = vec![0.0; k * (k + 1)];
    for i in 0..k {
        for j in 0..k {
            a[i * (k + 1) + j] = dot(&normals[s[i]], &normals[s[j]]);
        }
        a[i * (k + 1) + k] = dot(&normals[s[i]], v);
    }
    let diag_scale = (0..k).map(|i| a[i * (k + 1) + i]).fold(0.0, f64::max);
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| a[x * (k + 1) + col].abs().total_cmp(&a[y * (k + 1) + col].abs()))?;
        if a[piv * (k + 1) + col].abs() <= 1e-12 * diag_scale {
            return None;
        }
        for c in 0..=k {
            a.swap(col * (k + 1) + c, piv * (k + 1) + c);
        }
        for r in 0..k {
            if r != col {
                let f = a[r * (k + 1) + col] / a[col * (k + 1) + col];
                for c in col..=k {
                    a[r * (k + 1) + c] -= f * a[col * (k + 1) + c];
                }
            }
        }
    }
    Some((0..k).map(|i| a[i * (k + 1) + k] / a[i * (k + 1) + i]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexMethod {
    /// Fresh data samples, exact law of the normalized sum.
    DirectMc,
    /// Gaussian vector with the covariance of `X`.
    Gaussian,
    /// Gaussian multipliers on one fixed data sample.
    MultiplierBootstrap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexOptions {
    pub n: usize,
    pub sphere_net_eps: f64,
    pub method: ConvexMethod,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexEstimate {
    pub prob: f64,
    pub se: f64,
    /// Estimate at the nested net refined to half the mesh.
    pub refined_prob: f64,
    /// `prob - refined_prob`, nonnegative by nesting.
    pub net_bias: f64,
    pub net_size: usize,
    pub refined_net_size: usize,
}

/// Mean and covariance (row-major) of a single draw of `X`.
pub fn vector_moments(dist: &Distribution, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    dist.validate(dim)?;
    let mut cov = vec![0.0; dim * dim];
    match dist {
        Distribution::StandardGaussian => {
            (0..dim).for_each(|j| cov[j * dim + j] = 1.0);
            Ok((vec![0.0; dim], cov))
        }
        Distribution::UniformCube => {
            (0..dim).for_each(|j| cov[j * dim + j] = 1.0 / 12.0);
            Ok((vec![0.5; dim], cov))
        }
        Distribution::CustomTabulated { atoms } => {
            let m = atoms.len() as f64;
            let mean: Vec<f64> = (0..dim).map(|c| atoms.iter().map(|a| a[c]).sum::<f64>() / m).collect();
            for a in atoms {
                for j in 0..dim {
                    for k in 0..dim {
                        cov[j * dim + k] += (a[j] - mean[j]) * (a[k] - mean[k]) / m;
                    }
                }
            }
            Ok((mean, cov))
        }
    }
}

struct Directions {
    dirs: Vec<Vec<f64>>,
    drift: Vec<f64>,
    coarse: usize,
}

fn directions(set: &ConvexSetSpec, eps: f64, seed: u64) -> Result<Directions> {
    if let ConvexKind::Halfspace { normal, offset } = &set.kind {
        let nn = norm(normal);
        let v: Vec<f64> = normal.iter().map(|a| a / nn).collect();
        return Ok(Directions {
            dirs: vec![v],
            drift: vec![-offset / nn],
            coarse: 1,
        });
    }
    let mut dirs = sphere_net(set.dim, eps, seed)?.points;
    let coarse = dirs.len();
    dirs.extend(sphere_net(set.dim, eps / 2.0, seed)?.points);
    let drift = dirs
        .iter()
        .map(|v| {
            let s = support_value(set, v);
            if s.is_finite() {
                Ok(-s)
            } else {
                Err(Error::Config("set is unbounded in a net direction".into()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Directions { dirs, drift, coarse })
}

/// Returns whether the coarse and the refined statistic are `<= 0`.
fn inside(d: &Directions, s: &[f64]) -> (bool, bool) {
    let stat = |range: std::ops::Range<usize>| {
        range
            .map(|j| dot(&d.dirs[j], s) + d.drift[j])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let coarse = stat(0..d.coarse);
    let fine = coarse.max(stat(d.coarse..d.dirs.len()));
    (coarse <= 0.0, fine <= 0.0)
}

/// `P(n^{-1/2} sum (X_i - EX) in A)` under the chosen approximation.
pub fn convex_probability(set: &ConvexSetSpec, dist: &Distribution, opts: &ConvexOptions) -> Result<ConvexEstimate> {
    set.validate()?;
    if opts.n == 0 || opts.reps == 0 {
        return input("n and reps must be >= 1");
    }
    if !(opts.sphere_net_eps > 0.0) {
        return input("sphere_net_eps must be > 0");
    }
    let dim = set.dim;
    let (mean, cov) = vector_moments(dist, dim)?;
    let dirs = directions(set, opts.sphere_net_eps, opts.seed)?;
    let root_n = (opts.n as f64).sqrt();
    let hits: Vec<(bool, bool)> = match opts.method {
        ConvexMethod::DirectMc => (0..opts.reps)
            .into_par_iter()
            .map(|k| {
                let data = DataSample::draw(dist, dim, opts.n, rng::split_seed(opts.seed, &[TAG_DATA, k as u64]))?;
                let mut s = vec![0.0; dim];
                for row in data.points.rows() {
                    for c in 0..dim {
                        s[c] += row[c] - mean[c];
                    }
                }
                s.iter_mut().for_each(|v| *v /= root_n);
                Ok(inside(&dirs, &s))
            })
            .collect::<Result<Vec<_>>>()?,
        ConvexMethod::Gaussian => {
            let model = CovarianceModel::new(vec![0.0; dim], cov)?;
            (0..opts.reps)
                .into_par_iter()
                .map(|k| {
                    let mut r = rng::stream(opts.seed, &[TAG_GAUSS, k as u64]);
                    let mut s = vec![0.0; dim];
                    model.draw_centered(&mut r, &mut s);
                    inside(&dirs, &s)
                })
                .collect()
        }
        ConvexMethod::MultiplierBootstrap => {
            let data = DataSample::draw(dist, dim, opts.n, rng::split_seed(opts.seed, &[TAG_DATA]))?;
            let mut centered = data.points.as_slice().to_vec();
            for c in 0..dim {
                let m = data.points.rows().map(|r| r[c]).sum::<f64>() / opts.n as f64;
                centered.iter_mut().skip(c).step_by(dim).for_each(|v| *v -= m);
            }
            (0..opts.reps)
                .into_par_iter()
                .map(|k| {
                    let mut r = rng::stream(opts.seed, &[TAG_WEIGHTS, k as u64]);
                    let mut s = vec![0.0; dim];
                    for row in centered.chunks_exact(dim) {
                        let e: f64 = r.sample(StandardNormal);
                        for c in 0..dim {
                            s[c] += e * row[c];
                        }
                    }
                    s.iter_mut().for_each(|v| *v /= root_n);
                    inside(&dirs, &s)
                })
                .collect()
        }
    };
    let reps = opts.reps as f64;
    let prob = hits.iter().filter(|h| h.0).count() as f64 / reps;
    let refined_prob = hits.iter().filter(|h| h.1).count() as f64 / reps;
    Ok(ConvexEstimate {
        prob,
        se: (prob * (1.0 - prob) / reps).sqrt(),
        refined_prob,
        net_bias: prob - refined_prob,
        net_size: dirs.coarse,
        refined_net_size: dirs.dirs.len(),
    })
}

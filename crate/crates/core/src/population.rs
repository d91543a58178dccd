//! Data distributions, i.i.d. samples, and population moments `Pf_j` and
//! `Cov(f_j(X), f_k(X))` over a net.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{input, Error, Result};
use crate::function_class::{ClassKind, FunctionClassSpec, Member, Net};
use crate::rng::{self, TAG_REFERENCE};

/// Row-major `n x dim` matrix of points.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return input("points must have dimension >= 1");
        }
        if data.len() % dim != 0 {
            return input(format!(
                "flat buffer of length {} is not a multiple of dim {}",
                data.len(),
                dim
            ));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return input("rows have unequal lengths");
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[0,1]^d`.
    UniformCube,
    /// `N(0, I_d)`.
    StandardGaussian,
    /// Uniform over a finite list of atoms.
    CustomTabulated { atoms: Vec<Vec<f64>> },
}

impl Distribution {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Distribution::CustomTabulated { atoms } = self {
            if atoms.is_empty() {
                return Err(Error::Config("tabulated distribution has no atoms".into()));
            }
            if atoms.iter().any(|a| a.len() != dim) {
                return Err(Error::Config(format!(
                    "tabulated atoms must have dimension {dim}"
                )));
            }
        }
        Ok(())
    }

    pub fn draw_point<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Distribution::UniformCube => out.iter_mut().for_each(|v| *v = rng.random()),
            Distribution::StandardGaussian => out
                .iter_mut()
                .for_each(|v| *v = rng.sample(StandardNormal)),
            Distribution::CustomTabulated { atoms } => {
                let k = rng.random_range(0..atoms.len());
                out.copy_from_slice(&atoms[k]);
            }
        }
    }

    pub fn sample_points<R: Rng + ?Sized>(&self, dim: usize, n: usize, rng: &mut R) -> Points {
        let mut data = vec![0.0; n * dim];
        for row in data.chunks_exact_mut(dim) {
            self.draw_point(rng, row);
        }
        Points { dim, data }
    }
}

/// An i.i.d. sample `X_1, ..., X_n` together with its provenance.
#[derive(Clone, Debug)]
pub struct DataSample {
    pub points: Points,
    pub distribution: Distribution,
    pub seed: u64,
}

impl DataSample {
    pub fn draw(distribution: &Distribution, dim: usize, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return input("sample size must be >= 1");
        }
        distribution.validate(dim)?;
        let mut rng = rng::rng_from(seed);
        Ok(Self {
            points: distribution.sample_points(dim, n, &mut rng),
            distribution: distribution.clone(),
            seed,
        })
    }

    /// Wraps explicitly given points (used for hand-checked examples).
    pub fn tabulated(points: Points, seed: u64) -> Self {
        let atoms = points.rows().map(<[f64]>::to_vec).collect();
        Self {
            points,
            distribution: Distribution::CustomTabulated { atoms },
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationOptions {
    /// Size of the reference sample used where no closed form exists.
    pub reference_size: usize,
    pub seed: u64,
}

impl Default for PopulationOptions {
    fn default() -> Self {
        Self {
            reference_size: 1_000_000,
            seed: 0x5eed,
        }
    }
}

/// Population means and covariance of the net functions.
#[derive(Clone, Debug)]
pub struct Moments {
    pub means: Vec<f64>,
    /// Row-major `N x N`, exactly symmetric.
    pub cov: Vec<f64>,
    /// True when every entry is closed form (no reference sample involved).
    pub exact: bool,
    pub reference_size: usize,
}

fn unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

/// Closed-form `P f` for a single indicator member, where one is known.
pub(crate) fn closed_form_mean(
    class: &FunctionClassSpec,
    member: &Member,
    dist: &Distribution,
) -> Option<f64> {
    let d = class.dim;
    let p = member.params();
    match (&class.kind, dist) {
        (ClassKind::BallIndicators { .. }, Distribution::UniformCube) => {
            let (c, r) = (&p[..d], p[d]);
            if c.iter().all(|&ci| ci - r >= 0.0 && ci + r <= 1.0) {
                return Some(unit_ball_volume(d) * r.powi(d as i32));
            }
            // every corner of the cube inside the ball
            let far: f64 = c.iter().map(|&ci| ci.max(1.0 - ci).powi(2)).sum();
            (far <= r * r).then_some(1.0)
        }
        (ClassKind::BallIndicators { .. }, Distribution::StandardGaussian) => {
            let (c, r) = (&p[..d], p[d]);
            if c.iter().all(|&ci| ci == 0.0) {
                ChiSquared::new(d as f64).ok().map(|chi| chi.cdf(r * r))
            } else {
                None
            }
        }
        (ClassKind::HalfspaceIndicators { .. }, Distribution::StandardGaussian) => {
            Some(Normal::standard().cdf(p[d]))
        }
        _ => None,
    }
}

fn tabulated_moments(net: &Net, atoms: &[Vec<f64>]) -> Moments {
    let n_members = net.len();
    let m = atoms.len() as f64;
    let vals: Vec<Vec<f64>> = atoms
        .iter()
        .map(|x| net.members.iter().map(|f| net.class.value(f, x)).collect())
        .collect();
    let mut means = vec![0.0; n_members];
    for row in &vals {
        for (acc, v) in means.iter_mut().zip(row) {
            *acc += v / m;
        }
    }
    let mut cov = vec![0.0; n_members * n_members];
    for j in 0..n_members {
        for k in j..n_members {
            let s: f64 = vals
                .iter()
                .map(|row| (row[j] - means[j]) * (row[k] - means[k]))
                .sum::<f64>()
                / m;
            cov[j * n_members + k] = s;
            cov[k * n_members + j] = s;
        }
    }
    Moments {
        means,
        cov,
        exact: true,
        reference_size: 0,
    }
}

fn linear_moments(net: &Net, dist: &Distribution) -> Moments {
    let n_members = net.len();
    let (mean_coord, var) = match dist {
        Distribution::StandardGaussian => (0.0, 1.0),
        _ => (0.5, 1.0 / 12.0),
    };
    let means = net
        .members
        .iter()
        .map(|v| v.params().iter().sum::<f64>() * mean_coord)
        .collect();
    let mut cov = vec![0.0; n_members * n_members];
    for j in 0..n_members {
        for k in j..n_members {
            let dot: f64 = net.members[j]
                .params()
                .iter()
                .zip(net.members[k].params())
                .map(|(a, b)| a * b)
                .sum();
            cov[j * n_members + k] = dot * var;
            cov[k * n_members + j] = dot * var;
        }
    }
    Moments {
        means,
        cov,
        exact: true,
        reference_size: 0,
    }
}

/// Indicator classes: closed-form means and variances where available,
/// correlations from a reference sample. Scaling the reference correlation
/// matrix by the (exact) standard deviations keeps the result PSD.
fn indicator_moments(net: &Net, dist: &Distribution, opts: &PopulationOptions) -> Result<Moments> {
    let n_members = net.len();
    let m = opts.reference_size;
    if m == 0 {
        return Err(Error::Config("reference_size must be >= 1".into()));
    }
    let words = m.div_ceil(64);
    let dim = net.class.dim;
    let mut rng = rng::stream(opts.seed, &[TAG_REFERENCE]);
    let reference = dist.sample_points(dim, m, &mut rng);

    let bits: Vec<Vec<u64>> = net
        .members
        .par_iter()
        .map(|f| {
            let mut b = vec![0u64; words];
            for (i, x) in reference.rows().enumerate() {
                if net.class.value(f, x) != 0.0 {
                    b[i / 64] |= 1 << (i % 64);
                }
            }
            b
        })
        .collect();
    let counts: Vec<f64> = bits
        .iter()
        .map(|b| b.iter().map(|w| w.count_ones() as f64).sum())
        .collect();
    let mf = m as f64;
    let ref_mean: Vec<f64> = counts.iter().map(|c| c / mf).collect();
    let ref_var: Vec<f64> = ref_mean.iter().map(|p| p * (1.0 - p)).collect();

    let means: Vec<f64> = net
        .members
        .iter()
        .zip(&ref_mean)
        .map(|(f, &pm)| closed_form_mean(&net.class, f, dist).unwrap_or(pm))
        .collect();
    let sd: Vec<f64> = means.iter().map(|p| (p * (1.0 - p)).max(0.0).sqrt()).collect();

    let rows: Vec<Vec<f64>> = (0..n_members)
        .into_par_iter()
        .map(|j| {
            let mut row = vec![0.0; n_members];
            for (k, slot) in row.iter_mut().enumerate().skip(j) {
                *slot = if j == k {
                    sd[j] * sd[j]
                } else if ref_var[j] > 0.0 && ref_var[k] > 0.0 {
                    let both: f64 = bits[j]
                        .iter()
                        .zip(&bits[k])
                        .map(|(a, b)| (a & b).count_ones() as f64)
                        .sum();
                    let c = both / mf - ref_mean[j] * ref_mean[k];
                    c / (ref_var[j] * ref_var[k]).sqrt() * sd[j] * sd[k]
                } else {
                    0.0
                };
            }
            row
        })
        .collect();
    let mut cov = vec![0.0; n_members * n_members];
    for j in 0..n_members {
        for k in j..n_members {
            cov[j * n_members + k] = rows[j][k];
            cov[k * n_members + j] = rows[j][k];
        }
    }
    Ok(Moments {
        means,
        cov,
        exact: false,
        reference_size: m,
    })
}

/// Resolves `Pf_j` and `Cov(f_j, f_k)` for every net member.
pub fn population_moments(
    net: &Net,
    dist: &Distribution,
    opts: &PopulationOptions,
) -> Result<Moments> {
    dist.validate(net.class.dim)?;
    match (&net.class.kind, dist) {
        (_, Distribution::CustomTabulated { atoms }) => Ok(tabulated_moments(net, atoms)),
        (ClassKind::LinearSphere, _) => Ok(linear_moments(net, dist)),
        (ClassKind::BallIndicators { .. } | ClassKind::HalfspaceIndicators { .. }, _) => {
            indicator_moments(net, dist, opts)
        }
        (ClassKind::Tabulated { .. }, _) => Err(Error::Config(
            "a tabulated class needs a custom_tabulated population".into(),
        )),
    }
}

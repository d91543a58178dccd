//! Monte Carlo experiments measuring how close the laws of `Z`, `Z^e | X`
//! and `Z^* | X` are to `Z~`, in Kolmogorov distance.
//!
//! Marginal experiments draw one `Z` per independent data sample. Conditional
//! experiments fix the data and replicate the bootstrap weights, then report
//! the spread of the per-sample distances over the outer samples.
//! The `Z~` reference always uses the population covariance, never the
//! per-sample one.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::factorial::ln_binomial;

use crate::bounds::{anticoncentration_bound, compute_kn, delta_rate, ClassParams, Rate};
use crate::error::{input, Error, Result};
use crate::function_class::{build_net, drift_count, sphere_net, DriftSpec, FunctionClassSpec, Net, NetOptions};
use crate::gaussian_kernel::CovarianceModel;
use crate::population::{population_moments, DataSample, Distribution, PopulationOptions};
use crate::process_engine::{empirical_sup_from, Conditional, ProcessKind, ValueMatrix};
use crate::rng::{self, TAG_DATA, TAG_GAUSS, TAG_PROBE, TAG_WEIGHTS};

/// Exact two-sample Kolmogorov distance between right-continuous empirical
/// CDFs. Both inputs must be sorted ascending.
pub fn kolmogorov_distance(sample1: &[f64], sample2: &[f64]) -> Result<f64> {
    if sample1.is_empty() || sample2.is_empty() {
        return input("kolmogorov_distance needs two nonempty samples");
    }
    let sorted = |s: &[f64]| s.windows(2).all(|w| w[0] <= w[1]);
    if !sorted(sample1) || !sorted(sample2) {
        return input("samples must be sorted ascending without NaN");
    }
    let (m1, m2) = (sample1.len() as f64, sample2.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < sample1.len() || j < sample2.len() {
        // next jump point; consume every tie on both sides
        let t = match (sample1.get(i), sample2.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < sample1.len() && sample1[i] == t {
            i += 1;
        }
        while j < sample2.len() && sample2[j] == t {
            j += 1;
        }
        best = best.max((i as f64 / m1 - j as f64 / m2).abs());
    }
    Ok(best)
}

/// Two-sample KS scale `1.36 sqrt(1/m + 1/m')` used as a Monte Carlo
/// tolerance.
pub fn ks_band(m1: usize, m2: usize) -> f64 {
    1.36 * (1.0 / m1 as f64 + 1.0 / m2 as f64).sqrt()
}

/// Kolmogorov bound from a coupling: if `P(|V - W| > r1) <= r2`, then
/// `KS(V, W) <= sup_t P(|W - t| <= r1) + r2`.
pub fn coupling_to_kolmogorov(r1: f64, r2: f64, levy_concentration: f64) -> Result<f64> {
    if !(r1 >= 0.0) {
        return input("r1 must be >= 0");
    }
    if !(0.0..=1.0).contains(&r2) || !(0.0..=1.0).contains(&levy_concentration) {
        return input("r2 and the concentration value must lie in [0,1]");
    }
    Ok(levy_concentration + r2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub epsilon: f64,
    pub pool_size: usize,
    pub probe_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_members: Option<usize>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            pool_size: 1000,
            probe_size: 10_000,
            max_members: None,
        }
    }
}

/// Constants entering `K_n` and the rates (everything but `n` and `N_B`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub v: f64,
    pub a_const: f64,
    pub b: f64,
    pub sigma: f64,
    pub q: f64,
    pub gamma: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            v: 4.0,
            a_const: std::f64::consts::E,
            b: 1.0,
            sigma: 1.0,
            q: 4.0,
            gamma: 0.1,
        }
    }
}

impl RateConfig {
    pub fn params(&self, n: u64, n_b_eta: f64, eta: f64) -> ClassParams {
        ClassParams {
            v: self.v,
            a_const: self.a_const,
            b: self.b,
            sigma: self.sigma,
            q: self.q,
            n,
            n_b_eta,
            eta,
            gamma: self.gamma,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub class: FunctionClassSpec,
    #[serde(default)]
    pub net: NetConfig,
    pub drift: DriftSpec,
    pub data: Distribution,
    pub n_grid: Vec<usize>,
    pub reps_outer: usize,
    pub reps_inner: usize,
    pub seed: u64,
    #[serde(default)]
    pub population: PopulationOptions,
    #[serde(default)]
    pub rates: RateConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.class.validate()?;
        self.data.validate(self.class.dim)?;
        if self.reps_outer == 0 || self.reps_inner == 0 {
            return Err(Error::Config("replication counts must be >= 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid must be nonempty with n >= 1".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if !(self.net.epsilon > 0.0) || self.net.probe_size == 0 {
            return Err(Error::Config("net epsilon must be > 0 and probe_size >= 1".into()));
        }
        if !(self.drift.eta > 0.0) {
            return Err(Error::Config("drift eta must be > 0".into()));
        }
        if self.population.reference_size == 0 {
            return Err(Error::Config("reference_size must be >= 1".into()));
        }
        self.rates.params(self.n_grid[0] as u64, 1.0, self.drift.eta).validate()?;
        Ok(())
    }
}

/// Net, population means, and `Z~` law shared by every `n` of one experiment.
#[derive(Clone, Debug)]
pub struct Setup {
    pub net: Net,
    pub means: Vec<f64>,
    pub model: CovarianceModel,
    pub n_b_eta: usize,
    pub reference_size: usize,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let mut probe_rng = rng::stream(cfg.seed, &[TAG_PROBE]);
    let probe = cfg.data.sample_points(cfg.class.dim, cfg.net.probe_size, &mut probe_rng);
    let opts = NetOptions {
        pool_size: cfg.net.pool_size,
        max_members: cfg.net.max_members,
    };
    let net = build_net(&cfg.class, cfg.net.epsilon, &probe, &cfg.drift, &opts, cfg.seed)?;
    let moments = population_moments(&net, &cfg.data, &cfg.population)?;
    let model = CovarianceModel::new(net.drift.clone(), moments.cov)?;
    let n_b_eta = drift_count(&cfg.drift, &net.class, &net.members)?;
    Ok(Setup {
        net,
        means: moments.means,
        model,
        n_b_eta,
        reference_size: moments.reference_size,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub kind: ProcessKind,
    /// KS to the `Z~` reference; the median over outer samples for
    /// conditional experiments.
    pub ks: f64,
    /// Two-sample Monte Carlo band for the sample sizes involved.
    pub se: f64,
    pub ks_median: f64,
    pub ks_p90: f64,
    pub per_sample_ks: Vec<f64>,
    pub kn: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub side_condition_ok: bool,
    /// Sorted draws of the statistic (the first outer sample for
    /// conditional experiments).
    #[serde(skip)]
    pub sample: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub rows: Vec<ReportRow>,
    pub net_size: usize,
    pub probe_size: usize,
    pub reference_size: usize,
    pub reps_outer: usize,
    pub reps_inner: usize,
    /// Sorted `Z~` reference sample.
    #[serde(skip)]
    pub reference: Vec<f64>,
    pub fit: Option<RegressionFit>,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Nearest-rank quantile of a sorted slice.
fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

fn rate_columns(cfg: &ExperimentConfig, n: usize, n_b: usize) -> (f64, f64, f64, f64, bool, bool) {
    let p = cfg.rates.params(n as u64, n_b as f64, cfg.drift.eta);
    let (d1, d2, d3) = (
        delta_rate(&p, Rate::D1),
        delta_rate(&p, Rate::D2),
        delta_rate(&p, Rate::D3),
    );
    (
        compute_kn(&p),
        d1.value,
        d2.value,
        d3.value,
        d1.side_condition_ok,
        d2.side_condition_ok,
    )
}

fn reference_sample(setup: &Setup, cfg: &ExperimentConfig) -> Vec<f64> {
    sorted(setup.model.sample_sups(cfg.reps_inner, rng::split_seed(cfg.seed, &[TAG_GAUSS])))
}

fn data_seed(cfg: &ExperimentConfig, n: usize, r: usize) -> u64 {
    rng::split_seed(cfg.seed, &[TAG_DATA, n as u64, r as u64])
}

/// `KS(Z, Z~)` at each `n`, one `Z` per independent data sample.
pub fn run_marginal_experiment(cfg: &ExperimentConfig) -> Result<DistanceReport> {
    let setup = prepare(cfg)?;
    run_marginal_with(cfg, &setup)
}

pub fn run_marginal_with(cfg: &ExperimentConfig, setup: &Setup) -> Result<DistanceReport> {
    let reference = reference_sample(setup, cfg);
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let z: Vec<f64> = (0..cfg.reps_outer)
            .into_par_iter()
            .map(|r| {
                let data = DataSample::draw(&cfg.data, cfg.class.dim, n, data_seed(cfg, n, r))?;
                let values = ValueMatrix::new(&data, &setup.net)?;
                Ok(empirical_sup_from(&values, &setup.means)?.value)
            })
            .collect::<Result<Vec<_>>>()?;
        let z = sorted(z);
        let ks = kolmogorov_distance(&z, &reference)?;
        let (kn, d1, d2, d3, side, _) = rate_columns(cfg, n, setup.n_b_eta);
        rows.push(ReportRow {
            n,
            kind: ProcessKind::Z,
            ks,
            se: ks_band(z.len(), reference.len()),
            ks_median: ks,
            ks_p90: ks,
            per_sample_ks: vec![ks],
            kn,
            delta1: d1,
            delta2: d2,
            delta3: d3,
            side_condition_ok: side,
            sample: z,
        });
    }
    Ok(finish(cfg, setup, rows, reference))
}

fn finish(cfg: &ExperimentConfig, setup: &Setup, rows: Vec<ReportRow>, reference: Vec<f64>) -> DistanceReport {
    let mut report = DistanceReport {
        rows,
        net_size: setup.net.len(),
        probe_size: setup.net.probe_size,
        reference_size: setup.reference_size,
        reps_outer: cfg.reps_outer,
        reps_inner: cfg.reps_inner,
        reference,
        fit: None,
    };
    let kind = report.rows.first().map(|r| r.kind);
    if let Some(kind) = kind {
        report.fit = rate_regression(&report, kind).ok();
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapKind {
    Multiplier,
    Empirical,
}

impl BootstrapKind {
    pub fn process(self) -> ProcessKind {
        match self {
            BootstrapKind::Multiplier => ProcessKind::Ze,
            BootstrapKind::Empirical => ProcessKind::Zstar,
        }
    }
}

/// Per-data-sample `KS(Z^e | X, Z~)` or `KS(Z^* | X, Z~)`.
pub fn run_conditional_experiment(cfg: &ExperimentConfig, kind: BootstrapKind) -> Result<DistanceReport> {
    let setup = prepare(cfg)?;
    run_conditional_with(cfg, &setup, kind)
}

pub fn run_conditional_with(
    cfg: &ExperimentConfig,
    setup: &Setup,
    kind: BootstrapKind,
) -> Result<DistanceReport> {
    let reference = reference_sample(setup, cfg);
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let mut per_sample = Vec::with_capacity(cfg.reps_outer);
        let mut first = Vec::new();
        for r in 0..cfg.reps_outer {
            let data = DataSample::draw(&cfg.data, cfg.class.dim, n, data_seed(cfg, n, r))?;
            let cond = Conditional::new(&data, &setup.net)?;
            let draws: Vec<f64> = (0..cfg.reps_inner)
                .into_par_iter()
                .map(|k| {
                    let s = rng::split_seed(cfg.seed, &[TAG_WEIGHTS, n as u64, r as u64, k as u64]);
                    match kind {
                        BootstrapKind::Multiplier => cond.multiplier_sup(s).value,
                        BootstrapKind::Empirical => cond.bootstrap_sup(s).value,
                    }
                })
                .collect();
            let draws = sorted(draws);
            per_sample.push(kolmogorov_distance(&draws, &reference)?);
            if r == 0 {
                first = draws;
            }
        }
        let ordered = sorted(per_sample.clone());
        let (kn, d1, d2, d3, side1, side2) = rate_columns(cfg, n, setup.n_b_eta);
        let median = median_sorted(&ordered);
        rows.push(ReportRow {
            n,
            kind: kind.process(),
            ks: median,
            se: ks_band(cfg.reps_inner, reference.len()),
            ks_median: median,
            ks_p90: quantile_sorted(&ordered, 0.9),
            per_sample_ks: per_sample,
            kn,
            delta1: d1,
            delta2: d2,
            delta3: d3,
            side_condition_ok: match kind {
                BootstrapKind::Multiplier => side2,
                BootstrapKind::Empirical => side1,
            },
            sample: first,
        });
    }
    Ok(finish(cfg, setup, rows, reference))
}

/// Least-squares fit of `log y` on `log x`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RegressionFit> {
    if points.len() < 3 {
        return input("rate regression needs at least 3 points");
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return input("rate regression needs positive values");
    }
    let m = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return input("rate regression needs distinct n values");
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RegressionFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fits `log KS` against `log n` over the rows of one process kind.
pub fn rate_regression(report: &DistanceReport, kind: ProcessKind) -> Result<RegressionFit> {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.kind == kind && r.ks > 0.0)
        .map(|r| (r.n as f64, r.ks))
        .collect();
    fit_loglog(&pts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparisonResult {
    pub ks: f64,
    pub delta: f64,
    /// `KS / sqrt(Delta log p)`; `None` when `Delta log p = 0`.
    pub scaled_ratio: Option<f64>,
    pub band: f64,
    pub p: usize,
}

/// Compares `max_j X_j`, `X ~ N(mean, covX)` with `max_j Y_j`,
/// `Y ~ N(mean, covY)`.
pub fn run_comparison_experiment(
    cov_x: &[f64],
    cov_y: &[f64],
    mean: &[f64],
    reps: usize,
    seed: u64,
) -> Result<ComparisonResult> {
    let p = mean.len();
    if cov_x.len() != p * p || cov_y.len() != p * p {
        return input("covariance shapes must match the mean");
    }
    if reps == 0 {
        return input("reps must be >= 1");
    }
    let mx = CovarianceModel::new(mean.to_vec(), cov_x.to_vec())?;
    let my = CovarianceModel::new(mean.to_vec(), cov_y.to_vec())?;
    let x = sorted(mx.sample_sups(reps, rng::split_seed(seed, &[1])));
    let y = sorted(my.sample_sups(reps, rng::split_seed(seed, &[2])));
    let ks = kolmogorov_distance(&x, &y)?;
    let delta = crate::bounds::cov_discrepancy(cov_x, cov_y)?;
    let denom = (delta * (p as f64).ln()).sqrt();
    Ok(ComparisonResult {
        ks,
        delta,
        scaled_ratio: (denom > 0.0).then(|| ks / denom),
        band: ks_band(reps, reps),
        p,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedCouplingConfig {
    pub dim: usize,
    /// Chord mesh of the sphere net.
    pub epsilon: f64,
    pub n: usize,
    pub reps: usize,
    /// Weight of the Rademacher component in each observation.
    pub tau: f64,
    pub seed: u64,
    /// Quantile of `|Z - Z~|` used as `r1`.
    pub quantile: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SharedCouplingReport {
    pub ks: f64,
    pub r1: f64,
    pub r2: f64,
    /// Fraction of pairs with `|Z - Z~| > r1`.
    pub exceed_frac: f64,
    pub levy: f64,
    pub bound: f64,
    pub net_size: usize,
}

/// Linear class on a sphere net with observations
/// `X_i = (xi_i + tau R_i) / sqrt(1 + tau^2)`, `xi_i ~ N(0, I)`, `R_i`
/// Rademacher. The Gaussian part of `n^{-1/2} sum X_i` is shared with `Z~`
/// and the Rademacher sum is quantile-coupled to a Gaussian, so both `Z`
/// and `Z~` are observed on the same draw.
pub fn run_shared_coupling_experiment(cfg: &SharedCouplingConfig) -> Result<SharedCouplingReport> {
    if cfg.dim == 0 || cfg.n == 0 || cfg.reps < 20 {
        return input("need dim >= 1, n >= 1 and reps >= 20");
    }
    if !(cfg.quantile > 0.0 && cfg.quantile < 1.0) || !(cfg.tau >= 0.0) {
        return input("quantile must lie in (0,1) and tau >= 0");
    }
    let net = sphere_net(cfg.dim, cfg.epsilon, cfg.seed)?.points;
    let n = cfg.n;
    // CDF of Binomial(n, 1/2)
    let mut cdf = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for k in 0..=n {
        acc += (ln_binomial(n as u64, k as u64) - n as f64 * std::f64::consts::LN_2).exp();
        cdf.push(acc);
    }
    let normal = Normal::standard();
    let scale = (1.0 + cfg.tau * cfg.tau).sqrt();
    let root_n = (n as f64).sqrt();
    let pairs: Vec<(f64, f64)> = (0..cfg.reps)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(cfg.seed, &[TAG_DATA, k as u64]);
            let mut s = vec![0.0; cfg.dim];
            let mut g = vec![0.0; cfg.dim];
            for c in 0..cfg.dim {
                let xi: f64 = r.sample(StandardNormal);
                let u = loop {
                    let u: f64 = r.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                let heads = cdf.partition_point(|&c| c < u).min(n);
                let rad = (2.0 * heads as f64 - n as f64) / root_n;
                let eta = normal.inverse_cdf(u);
                s[c] = (xi + cfg.tau * rad) / scale;
                g[c] = (xi + cfg.tau * eta) / scale;
            }
            let sup = |x: &[f64]| {
                net.iter()
                    .map(|v| v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            (sup(&s), sup(&g))
        })
        .collect();
    let z = sorted(pairs.iter().map(|p| p.0).collect());
    let zt = sorted(pairs.iter().map(|p| p.1).collect());
    let ks = kolmogorov_distance(&z, &zt)?;
    let diffs = sorted(pairs.iter().map(|p| (p.0 - p.1).abs()).collect());
    let r1 = quantile_sorted(&diffs, cfg.quantile);
    let exceed = diffs.iter().filter(|&&d| d > r1).count() as f64 / diffs.len() as f64;
    let r2 = 1.0 - cfg.quantile;
    // unit variances; below the minimal separation the net is its own cover
    // and the modulus term vanishes
    let r_grid: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    let levy = anticoncentration_bound(1.0, r1, 0.0, net.len(), 1e-9, &r_grid)?.min(1.0);
    let bound = coupling_to_kolmogorov(r1, r2, levy)?;
    Ok(SharedCouplingReport {
        ks,
        r1,
        r2,
        exceed_frac: exceed,
        levy,
        bound,
        net_size: net.len(),
    })
}

//! Tool-verification suites. Each returns long-format rows
//! `(item, metric, value)`.

use rand::Rng;
use rand_distr::StandardNormal;

use supcoupling::bounds::{
    compute_kn, delta_rate, gaussian_maxima, levy_concentration_mc, nazarov_density_bound,
    random_gaussian_config, Rate,
};
use supcoupling::coupling_lab::run_shared_coupling_experiment;
use supcoupling::rng;
use supcoupling::smooth_approx::{derivative_bound_check, softmax, MollifiedIndicator};

use crate::config::ToolSuite;
use crate::error::CliError;
use crate::output::fmt_num;

pub type Row = (String, String, String);

fn row(item: impl ToString, metric: &str, value: f64) -> Row {
    (item.to_string(), metric.to_string(), fmt_num(value))
}

pub fn run_suite(suite: &ToolSuite, seed: u64) -> Result<Vec<Row>, CliError> {
    match suite {
        ToolSuite::Softmax { trials, max_p } => softmax_suite(*trials, *max_p, seed),
        ToolSuite::Mollifier { deltas, grid_points } => mollifier_suite(deltas, *grid_points),
        ToolSuite::Nazarov {
            configs,
            max_p,
            min_var,
            epsilon,
            draws,
            grid_points,
        } => nazarov_suite(*configs, *max_p, *min_var, *epsilon, *draws, *grid_points, seed),
        ToolSuite::Rates {
            rates,
            n_b_eta,
            eta,
            n_grid,
        } => {
            let mut out = Vec::new();
            for &n in n_grid {
                let p = rates.params(n, *n_b_eta, *eta);
                p.validate()?;
                out.push(row(n, "K_n", compute_kn(&p)));
                for (label, r) in [("delta1", Rate::D1), ("delta2", Rate::D2), ("delta3", Rate::D3)] {
                    let v = delta_rate(&p, r);
                    out.push(row(n, label, v.value));
                    out.push(row(n, &format!("{label}_side_ok"), v.side_condition_ok as u8 as f64));
                }
            }
            Ok(out)
        }
        ToolSuite::SharedCoupling(cfg) => {
            let rep = run_shared_coupling_experiment(cfg)?;
            Ok(vec![
                row("shared", "KS", rep.ks),
                row("shared", "r1", rep.r1),
                row("shared", "r2", rep.r2),
                row("shared", "exceed_frac", rep.exceed_frac),
                row("shared", "levy", rep.levy),
                row("shared", "bound", rep.bound),
                row("shared", "net_size", rep.net_size as f64),
                row("shared", "bound_holds", (rep.ks <= rep.bound) as u8 as f64),
            ])
        }
    }
}

/// Sandwich check on random `(x, beta, mu)`; slack is relative to
/// `max(1, |max|)`.
pub fn softmax_suite(trials: usize, max_p: usize, seed: u64) -> Result<Vec<Row>, CliError> {
    let mut r = rng::stream(seed, &[rng::TAG_DATA]);
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    let mut violations = 0usize;
    for _ in 0..trials {
        let p = r.random_range(1..=max_p);
        let beta = 10f64.powf(r.random_range(-1.0..2.0));
        let x: Vec<f64> = (0..p).map(|_| 3.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let mu: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
        let f = softmax(&x, beta, &mu)?;
        let m = x.iter().zip(&mu).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
        let scale = m.abs().max(1.0);
        let lo = (m - f).max(0.0) / scale;
        let hi = (f - m - (p as f64).ln() / beta).max(0.0) / scale;
        if lo > 1e-9 || hi > 1e-9 {
            violations += 1;
        }
        lower = lower.max(lo);
        upper = upper.max(hi);
    }
    let single = softmax(&[0.8], 7.0, &[0.15])? == 0.8 + 0.15;
    let p = 16;
    let constant = softmax(&vec![1.5; p], 2.0, &vec![0.0; p])? == 1.5 + (p as f64).ln() / 2.0;
    Ok(vec![
        row("all", "trials", trials as f64),
        row("all", "max_lower_slack", lower),
        row("all", "max_upper_slack", upper),
        row("all", "violations", violations as f64),
        row("p1", "equality_exact", single as u8 as f64),
        row("constant", "equality_exact", constant as u8 as f64),
    ])
}

/// `A = [0, 1]`; the grid spans `[-4 delta, 1 + 4 delta]`.
pub fn mollifier_suite(deltas: &[f64], grid_points: usize) -> Result<Vec<Row>, CliError> {
    let mut out = Vec::new();
    for &d in deltas {
        let g = MollifiedIndicator::new(&[(0.0, 1.0)], d, 64)?;
        let (lo, hi) = (-4.0 * d, 1.0 + 4.0 * d);
        let grid: Vec<f64> = (0..grid_points)
            .map(|i| lo + (hi - lo) * i as f64 / (grid_points - 1) as f64)
            .collect();
        let mut violations = 0usize;
        for &t in &grid {
            let v = g.eval(t);
            let floor = if g.in_set(t) { 1.0 } else { 0.0 };
            let ceil = if g.in_enlargement(t, 3.0) { 1.0 } else { 0.0 };
            if v < floor - 1e-8 || v > ceil + 1e-8 {
                violations += 1;
            }
        }
        let rep = derivative_bound_check(&g, &grid, d / 200.0)?;
        out.push(row(d, "sandwich_violations", violations as f64));
        out.push(row(d, "d1_scaled", rep.d1_scaled));
        out.push(row(d, "d2_scaled", rep.d2_scaled));
        out.push(row(d, "d3_scaled", rep.d3_scaled));
        out.push(row(d, "lipschitz_ok", rep.lipschitz_ok as u8 as f64));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn nazarov_suite(
    configs: usize,
    max_p: usize,
    min_var: f64,
    epsilon: f64,
    draws: usize,
    grid_points: usize,
    seed: u64,
) -> Result<Vec<Row>, CliError> {
    let mut out = Vec::new();
    for c in 0..configs {
        let mut r = rng::stream(seed, &[rng::TAG_POOL, c as u64]);
        let p = r.random_range(1..=max_p);
        let model = random_gaussian_config(&mut r, p, min_var)?;
        let sigma_min = (0..p).map(|j| model.cov[j * p + j]).fold(f64::INFINITY, f64::min).sqrt();
        let maxima = gaussian_maxima(&model, draws, rng::split_seed(seed, &[rng::TAG_GAUSS, c as u64]));
        let mc = levy_concentration_mc(&maxima, epsilon, grid_points)?;
        let bound = nazarov_density_bound(p, sigma_min, epsilon)?;
        out.push(row(c, "p", p as f64));
        out.push(row(c, "sigma_min", sigma_min));
        out.push(row(c, "mc", mc.value));
        out.push(row(c, "mc_se", mc.se));
        out.push(row(c, "bound", bound));
        out.push(row(c, "violation", (mc.value > bound + 3.0 * mc.se) as u8 as f64));
    }
    Ok(out)
}

//! Acceptance gate: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each. Exits nonzero if any criterion fails.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};

use supcoupling::bounds::{
    compute_kn, delta_rate, gaussian_maxima, levy_concentration_mc, nazarov_density_bound,
    random_gaussian_config, ClassParams, Rate,
};
use supcoupling::convex_prob::{convex_probability, ConvexMethod, ConvexOptions, ConvexSetSpec};
use supcoupling::coupling_lab::{
    fit_loglog, ks_band, prepare, run_comparison_experiment, run_conditional_with, run_marginal_with,
    run_shared_coupling_experiment, BootstrapKind, ExperimentConfig, NetConfig, RateConfig,
    SharedCouplingConfig,
};
use supcoupling::function_class::{DriftSpec, FunctionClassSpec};
use supcoupling::population::{Distribution, PopulationOptions};
use supcoupling::rng;
use supcoupling::smooth_approx::{bump, derivative_bound_check, softmax, MollifiedIndicator};
use supcoupling_cli::config::{ComparisonSpec, ConvexSpec, ExperimentSpec, RunConfig, ToolSuite, ToolsSpec};
use supcoupling_cli::presets::remark1_config;
use supcoupling_cli::{run, RunOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_c3_c4() -> (Outcome, Outcome, Outcome) {
    let t = Instant::now();
    let cfg = remark1_config();
    let setup = prepare(&cfg).unwrap();
    let marginal = run_marginal_with(&cfg, &setup).unwrap();
    let (k128, k2048) = (marginal.rows[0].ks, marginal.rows[1].ks);
    let secs = t.elapsed().as_secs_f64();
    let n_net = setup.net.len();
    let c1 = outcome(
        k2048 < k128 && k2048 <= 0.08 && (80..=120).contains(&n_net) && secs <= 300.0,
        format!("N = {n_net}, KS(128) = {k128:.4}, KS(2048) = {k2048:.4} (<= 0.08), {secs:.1}s"),
    );

    let cond = ExperimentConfig {
        n_grid: vec![2048],
        reps_outer: 10,
        ..cfg
    };
    let mult = run_conditional_with(&cond, &setup, BootstrapKind::Multiplier).unwrap();
    let m = mult.rows[0].ks_median;
    let c3 = outcome(m <= 0.10, format!("median KS(Z^e|X, Z~) = {m:.4} (<= 0.10), p90 = {:.4}", mult.rows[0].ks_p90));
    let emp = run_conditional_with(&cond, &setup, BootstrapKind::Empirical).unwrap();
    let e = emp.rows[0].ks_median;
    let c4 = outcome(e <= 0.12, format!("median KS(Z^*|X, Z~) = {e:.4} (<= 0.12), p90 = {:.4}", emp.rows[0].ks_p90));
    (c1, c3, c4)
}

fn c2() -> Outcome {
    let cfg = ExperimentConfig {
        class: FunctionClassSpec::linear_sphere(3),
        net: NetConfig {
            epsilon: 0.3,
            ..NetConfig::default()
        },
        drift: DriftSpec::zero(0.1),
        data: Distribution::StandardGaussian,
        n_grid: vec![64, 1024],
        reps_outer: 4000,
        reps_inner: 4000,
        seed: 31,
        population: PopulationOptions::default(),
        rates: RateConfig::default(),
    };
    let setup = prepare(&cfg).unwrap();
    let rep = run_marginal_with(&cfg, &setup).unwrap();
    let tol = 0.064;
    let ks: Vec<f64> = rep.rows.iter().map(|r| r.ks).collect();
    outcome(
        ks.iter().all(|&k| k <= tol),
        format!("N = {}, KS(64) = {:.4}, KS(1024) = {:.4} (<= {tol:.4})", setup.net.len(), ks[0], ks[1]),
    )
}

fn c5() -> Outcome {
    let mut r = rng::rng_from(505);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = r.random_range(1..=64);
        let beta = 10f64.powf(r.random_range(-2.0..3.0));
        let x: Vec<f64> = (0..p).map(|_| 5.0 * r.sample::<f64, _>(StandardNormal)).collect();
        let mu: Vec<f64> = (0..p).map(|_| r.random_range(-2.0..2.0)).collect();
        let f = softmax(&x, beta, &mu).unwrap();
        let m = x.iter().zip(&mu).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
        let scale = m.abs().max(1.0);
        worst = worst
            .max((m - f) / scale)
            .max((f - m - (p as f64).ln() / beta) / scale);
    }
    let p1 = softmax(&[0.3], 5.0, &[-0.1]).unwrap() == 0.3 + -0.1;
    let constant = softmax(&[2.0; 64], 0.5, &[0.0; 64]).unwrap() == 2.0 + 64f64.ln() / 0.5;
    outcome(
        worst <= 1e-9 && p1 && constant,
        format!("worst relative slack = {worst:.2e} (<= 1e-9), p=1 exact: {p1}, constant x exact: {constant}"),
    )
}

/// Composite Simpson over `[-1, 1]` for `int h(t + delta z) phi(z) dz`.
fn mollifier_oracle(t: f64, delta: f64) -> f64 {
    let h = |y: f64| {
        let dist = if y < -delta {
            -delta - y
        } else if y > 1.0 + delta {
            y - 1.0 - delta
        } else {
            0.0
        };
        (1.0 - dist / delta).max(0.0)
    };
    let cells = 200_000;
    let w = 2.0 / cells as f64;
    let f = |z: f64| h(t + delta * z) * bump(z);
    let mut s = f(-1.0) + f(1.0);
    for i in 1..cells {
        let z = -1.0 + i as f64 * w;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z);
    }
    s * w / 3.0
}

fn c6() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for delta in [0.05, 0.1] {
        let g = MollifiedIndicator::new(&[(0.0, 1.0)], delta, 64).unwrap();
        let (lo, hi) = (-4.0 * delta, 1.0 + 4.0 * delta);
        let grid: Vec<f64> = (0..1000).map(|i| lo + (hi - lo) * i as f64 / 999.0).collect();
        let mut violations = 0;
        for &t in &grid {
            let v = g.eval(t);
            let floor = if (0.0..=1.0).contains(&t) { 1.0 } else { 0.0 };
            let ceil = if (-3.0 * delta..=1.0 + 3.0 * delta).contains(&t) { 1.0 } else { 0.0 };
            if v < floor - 1e-8 || v > ceil + 1e-8 {
                violations += 1;
            }
        }
        let oracle_err = grid
            .iter()
            .step_by(50)
            .map(|&t| (g.eval(t) - mollifier_oracle(t, delta)).abs())
            .fold(0.0, f64::max);
        let rep = derivative_bound_check(&g, &grid, delta / 200.0).unwrap();
        pass &= violations == 0 && rep.d1_scaled <= 1.05 && oracle_err <= 1e-6;
        details.push(format!(
            "delta={delta}: violations {violations}, max|g'|delta = {:.4}, oracle err {oracle_err:.1e}",
            rep.d1_scaled
        ));
    }
    outcome(pass, details.join("; "))
}

fn c7() -> Outcome {
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for c in 0..20u64 {
        let mut r = rng::stream(707, &[c]);
        let p = r.random_range(2..=50);
        let model = random_gaussian_config(&mut r, p, 0.25).unwrap();
        let sigma_min = (0..p).map(|j| model.cov[j * p + j]).fold(f64::INFINITY, f64::min).sqrt();
        assert!(sigma_min >= 0.5);
        let maxima = gaussian_maxima(&model, 100_000, rng::split_seed(707, &[c, 1]));
        let mc = levy_concentration_mc(&maxima, 0.05, 200).unwrap();
        let bound = nazarov_density_bound(p, sigma_min, 0.05).unwrap();
        if mc.value > bound + 3.0 * mc.se {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(mc.value / bound);
    }
    outcome(
        violations == 0,
        format!("20 configurations, violations = {violations}, max MC/bound = {worst_ratio:.3}"),
    )
}

fn c8() -> Outcome {
    let cfg = SharedCouplingConfig {
        dim: 3,
        epsilon: 0.5,
        n: 64,
        reps: 100_000,
        tau: 1.0,
        seed: 808,
        quantile: 0.95,
    };
    let rep = run_shared_coupling_experiment(&cfg).unwrap();
    outcome(
        rep.ks <= rep.bound && rep.exceed_frac <= rep.r2,
        format!(
            "KS = {:.4} <= bound {:.4} (r1 = {:.4}, r2 = {:.2}, levy = {:.4}, N = {})",
            rep.ks, rep.bound, rep.r1, rep.r2, rep.levy, rep.net_size
        ),
    )
}

fn equicorrelated(p: usize, rho: f64) -> Vec<f64> {
    (0..p * p).map(|k| if k / p == k % p { 1.0 } else { rho }).collect()
}

fn c9() -> Outcome {
    let p = 10;
    let base = equicorrelated(p, 0.5);
    let mean = vec![0.0; p];
    let reps = 100_000;
    let zero = run_comparison_experiment(&base, &base, &mean, reps, 909).unwrap();
    let eye = equicorrelated(p, 0.0);
    let ks: Vec<f64> = [0.01, 0.04, 0.16]
        .iter()
        .map(|&t| {
            let y: Vec<f64> = base.iter().zip(&eye).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            run_comparison_experiment(&base, &y, &mean, reps, 910).unwrap().ks
        })
        .collect();
    let band = ks_band(reps, reps);
    let monotone = ks.windows(2).all(|w| w[1] + 3.0 * band >= w[0]);

    let phi = Normal::standard();
    let oracle = (0..=40_000)
        .map(|k| -8.0 + 16.0 * k as f64 / 40_000.0)
        .map(|t| (phi.cdf(t).powi(2) - phi.cdf(t) * phi.cdf(t / 1.2f64.sqrt())).abs())
        .fold(0.0, f64::max);
    let diag = run_comparison_experiment(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.2], &[0.0, 0.0], 200_000, 911).unwrap();
    let pass = zero.ks <= zero.band && monotone && (diag.ks - oracle).abs() <= 0.01;
    outcome(
        pass,
        format!(
            "Delta=0 KS = {:.4} (band {:.4}); KS(t) = {:.4}, {:.4}, {:.4}; p=2 KS = {:.4} vs oracle {oracle:.4}",
            zero.ks, zero.band, ks[0], ks[1], ks[2], diag.ks
        ),
    )
}

fn close10(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-10 * b.abs()
}

fn c10() -> Outcome {
    let e = std::f64::consts::E;
    // (v, A, b, sigma, q, n, N_B, gamma) -> (K_n, delta1, delta2, delta3), 40-digit arithmetic
    let cases: [([f64; 8], [f64; 4]); 5] = [
        ([1.0, e, 1.0, 1.0, 4.0, 1000.0, 1.0, 0.1], [6.9077552789821371, 4.6555295672243546, 35.318431457279152, 37.789537004439966]),
        ([4.0, e, 1.0, 1.0, 4.0, 2048.0, 1.0, 0.05], [30.498475944637594, 17.022898073645487, 273.34402785260812, 280.77947512446156]),
        ([2.5, 10.0, 3.0, 0.5, 6.0, 100000.0, 12.0, 0.3], [31.267220312213571, 4.4471118136629952, 11.943326125029478, 13.920475668082224]),
        ([1.0, 1e6, 2.0, 0.1, 4.0, 50.0, 3.0, 0.5], [17.909855120186375, 17.23876146541596, 35.520525953526217, 36.740226012578417]),
        ([8.0, e, 1.0, 1.0, 8.0, 1048576.0, 100.0, 0.01], [115.50871907557934, 12.056916182239119, 309.2715681757366, 320.19376150808909]),
    ];
    let mut matched = 0;
    let mut monotone = true;
    for (x, want) in &cases {
        let p = ClassParams {
            v: x[0],
            a_const: x[1],
            b: x[2],
            sigma: x[3],
            q: x[4],
            n: x[5] as u64,
            n_b_eta: x[6],
            eta: 0.1,
            gamma: x[7],
        };
        let got = [
            compute_kn(&p),
            delta_rate(&p, Rate::D1).value,
            delta_rate(&p, Rate::D2).value,
            delta_rate(&p, Rate::D3).value,
        ];
        if got.iter().zip(want).all(|(g, w)| close10(*g, *w)) {
            matched += 1;
        }
        for rate in [Rate::D1, Rate::D2, Rate::D3] {
            let vals: Vec<f64> = (7..=20).map(|k| delta_rate(&p.with_n(1 << k), rate).value).collect();
            monotone &= vals.windows(2).all(|w| w[1] < w[0]);
        }
    }
    let mut slopes = Vec::new();
    for (expo, c) in [(-1.0 / 6.0, 0.9), (-0.25, 1.7)] {
        let pts: Vec<(f64, f64)> = (7..=20).map(|k| (2f64.powi(k), c * 2f64.powi(k).powf(expo))).collect();
        slopes.push((fit_loglog(&pts).unwrap().slope - expo).abs());
    }
    let slope_err = slopes.iter().copied().fold(0.0, f64::max);
    outcome(
        matched == 5 && monotone && slope_err <= 1e-9,
        format!("oracle sets matched {matched}/5, strictly decreasing in n: {monotone}, slope error {slope_err:.1e}"),
    )
}

fn c11() -> Outcome {
    let phi = Normal::standard();
    let mut worst_half = 0.0f64;
    for t in [-1.0, 0.5, 1.5] {
        let est = convex_probability(
            &ConvexSetSpec::halfspace(vec![1.0, 0.0, 0.0], t),
            &Distribution::StandardGaussian,
            &ConvexOptions {
                n: 1024,
                sphere_net_eps: 0.1,
                method: ConvexMethod::Gaussian,
                reps: 100_000,
                seed: 1111,
            },
        )
        .unwrap();
        worst_half = worst_half.max((est.prob - phi.cdf(t)).abs());
    }
    let mut ball_ok = true;
    let mut ball = Vec::new();
    for r in [1.0, 2.0] {
        let est = convex_probability(
            &ConvexSetSpec::ball(vec![0.0, 0.0], r),
            &Distribution::StandardGaussian,
            &ConvexOptions {
                n: 1024,
                sphere_net_eps: 0.05,
                method: ConvexMethod::Gaussian,
                reps: 100_000,
                seed: 1112,
            },
        )
        .unwrap();
        let want = 1.0 - (-r * r / 2.0f64).exp();
        let err = (est.prob - want).abs();
        ball_ok &= err <= est.net_bias + 3.0 * est.se;
        ball.push(format!("r={r}: |err| = {err:.4} vs bias+3se = {:.4}", est.net_bias + 3.0 * est.se));
    }
    outcome(
        worst_half <= 0.01 && ball_ok,
        format!("halfspace max |P - Phi(t)| = {worst_half:.4}; {}", ball.join(", ")),
    )
}

fn c12() -> Outcome {
    let mut small = remark1_config();
    small.n_grid = vec![64, 256];
    small.reps_outer = 500;
    small.reps_inner = 500;
    small.population.reference_size = 50_000;
    let cond = ExperimentConfig {
        reps_outer: 3,
        ..small.clone()
    };
    let cfg = RunConfig {
        threads: None,
        out_dir: None,
        experiments: vec![
            ExperimentSpec::Marginal {
                name: "marginal".into(),
                config: small,
            },
            ExperimentSpec::Conditional {
                name: "empirical".into(),
                bootstrap: BootstrapKind::Empirical,
                config: cond,
            },
            ExperimentSpec::Comparison(ComparisonSpec {
                name: "comparison".into(),
                mean: vec![0.0; 3],
                cov_x: vec![vec![1.0, 0.3, 0.0], vec![0.3, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                cov_y: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
                t_grid: vec![0.0, 0.5, 1.0],
                reps: 5000,
                seed: 3,
            }),
            ExperimentSpec::Convex(ConvexSpec {
                name: "convex".into(),
                set: ConvexSetSpec::ball(vec![0.0, 0.0], 0.4),
                data: Distribution::UniformCube,
                n: 100,
                sphere_net_eps: 0.2,
                methods: vec![ConvexMethod::DirectMc, ConvexMethod::MultiplierBootstrap],
                reps: 2000,
                seed: 4,
            }),
            ExperimentSpec::Tools(ToolsSpec {
                name: "shared".into(),
                seed: 5,
                suite: ToolSuite::SharedCoupling(SharedCouplingConfig {
                    dim: 2,
                    epsilon: 0.5,
                    n: 16,
                    reps: 2000,
                    tau: 1.0,
                    seed: 5,
                    quantile: 0.95,
                }),
            }),
        ],
    };
    let dir = tempfile::tempdir().unwrap();
    let go = |sub: &str, threads: usize| {
        run(
            cfg.clone(),
            &RunOptions {
                out_dir: Some(dir.path().join(sub)),
                threads: Some(threads),
                ..RunOptions::default()
            },
        )
        .unwrap()
    };
    let (a, b) = (go("a", 2), go("b", 2));
    let identical = a
        .outputs
        .iter()
        .zip(&b.outputs)
        .all(|(x, y)| std::fs::read(&x.path).unwrap() == std::fs::read(&y.path).unwrap());
    outcome(
        identical && a.outputs.len() == 5,
        format!("{} CSVs byte-identical across reruns: {identical}", a.outputs.len()),
    )
}

fn main() {
    let t = Instant::now();
    let (c1, c3, c4) = c1_c3_c4();
    let results = vec![
        ("1 ball-indicator marginal coupling", c1),
        ("2 exact-Gaussian sanity", c2()),
        ("3 multiplier bootstrap conditional", c3),
        ("4 empirical bootstrap conditional", c4),
        ("5 softmax sandwich", c5()),
        ("6 mollifier", c6()),
        ("7 Nazarov density bound", c7()),
        ("8 anti-concentration composition", c8()),
        ("9 Gaussian comparison", c9()),
        ("10 rate formulas", c10()),
        ("11 convex-set probability", c11()),
        ("12 determinism", c12()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += !o.pass as usize;
        println!("[{tag}] criterion {name}: {}", o.detail);
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        t.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

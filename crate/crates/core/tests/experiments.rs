use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use supcoupling::coupling_lab::{
    kolmogorov_distance, ks_band, run_comparison_experiment, run_conditional_experiment,
    run_marginal_experiment, run_shared_coupling_experiment, BootstrapKind, ExperimentConfig,
    NetConfig, RateConfig, SharedCouplingConfig,
};
use supcoupling::function_class::{DriftSpec, FunctionClassSpec, Member, Net};
use supcoupling::gaussian_kernel::estimate_covariance;
use supcoupling::population::{Distribution, PopulationOptions};
use supcoupling::process_engine::{mean_vector, ProcessKind};
use supcoupling::rng;

fn linear_config(n_grid: Vec<usize>, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        class: FunctionClassSpec::linear_sphere(2),
        net: NetConfig {
            epsilon: 0.4,
            ..NetConfig::default()
        },
        drift: DriftSpec::zero(0.1),
        data: Distribution::StandardGaussian,
        n_grid,
        reps_outer: reps,
        reps_inner: reps,
        seed: 99,
        population: PopulationOptions::default(),
        rates: RateConfig::default(),
    }
}

#[test]
fn ball_mean_matches_area_and_monte_carlo() {
    let class = FunctionClassSpec::ball_indicators(2, [0.0, 1.0], [0.01, 0.5]);
    let net = Net::from_members(class, vec![Member(vec![0.5, 0.5, 0.25])], vec![0.0]).unwrap();
    let pf = mean_vector(&net, &Distribution::UniformCube, &PopulationOptions::default()).unwrap();
    let area = std::f64::consts::PI / 16.0;
    assert!((pf[0] - area).abs() < 1e-12);

    let mut r = rng::rng_from(17);
    let draws = 10_000_000;
    let hits = (0..draws)
        .filter(|_| {
            let (x, y): (f64, f64) = (r.random(), r.random());
            (x - 0.5).powi(2) + (y - 0.5).powi(2) <= 0.0625
        })
        .count();
    let mc = hits as f64 / draws as f64;
    let se = (area * (1.0 - area) / draws as f64).sqrt();
    assert!((mc - area).abs() < 4.0 * se, "{mc}");
}

#[test]
fn disjoint_balls_have_negative_product_covariance() {
    let class = FunctionClassSpec::ball_indicators(2, [0.0, 1.0], [0.01, 0.5]);
    let members = vec![Member(vec![0.25, 0.25, 0.2]), Member(vec![0.75, 0.75, 0.15])];
    let net = Net::from_members(class, members, vec![0.0, 0.0]).unwrap();
    let model = estimate_covariance(&net, &Distribution::UniformCube, &PopulationOptions::default()).unwrap();
    let p = [std::f64::consts::PI * 0.04, std::f64::consts::PI * 0.0225];
    assert!((model.cov[0] - p[0] * (1.0 - p[0])).abs() < 1e-12);
    assert!((model.cov[3] - p[1] * (1.0 - p[1])).abs() < 1e-12);
    assert!((model.cov[1] + p[0] * p[1]).abs() < 1e-3, "{}", model.cov[1]);
    assert_eq!(model.cov[1], model.cov[2]);
}

#[test]
fn gaussian_data_linear_class_is_exactly_gaussian() {
    let cfg = linear_config(vec![16, 256], 4000);
    let report = run_marginal_experiment(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2);
    for row in &report.rows {
        assert_eq!(row.kind, ProcessKind::Z);
        assert!(row.ks <= 1.5 * ks_band(4000, 4000), "n={} ks={}", row.n, row.ks);
        assert!(row.kn > 0.0 && row.delta1 > 0.0);
    }
    // ceil(pi / (2 asin(0.2))) = 8
    assert_eq!(report.net_size, 8);
}

#[test]
fn constant_function_gives_zero_distance() {
    let class = FunctionClassSpec::tabulated(vec![vec![2.0, 2.0, 2.0]]);
    let cfg = ExperimentConfig {
        class,
        data: Distribution::CustomTabulated {
            atoms: vec![vec![0.0], vec![1.0], vec![2.0]],
        },
        ..linear_config(vec![8, 32], 200)
    };
    let report = run_marginal_experiment(&cfg).unwrap();
    assert!(report.rows.iter().all(|r| r.ks == 0.0));
    let boot = run_conditional_experiment(&ExperimentConfig { reps_outer: 2, ..cfg }, BootstrapKind::Empirical).unwrap();
    assert!(boot.rows.iter().all(|r| r.ks_median == 0.0 && r.ks_p90 == 0.0));
}

#[test]
fn experiments_are_reproducible() {
    let cfg = linear_config(vec![32, 64, 128], 300);
    let a = run_marginal_experiment(&cfg).unwrap();
    let b = run_marginal_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.fit.is_some());
    let small = ExperimentConfig { reps_outer: 3, reps_inner: 200, ..cfg };
    let c = run_conditional_experiment(&small, BootstrapKind::Multiplier).unwrap();
    let d = run_conditional_experiment(&small, BootstrapKind::Multiplier).unwrap();
    assert_eq!(c, d);
    assert_eq!(c.rows[0].per_sample_ks.len(), 3);
    let other = run_marginal_experiment(&ExperimentConfig { seed: 100, ..linear_config(vec![32, 64, 128], 300) }).unwrap();
    assert_ne!(a.rows[0].sample, other.rows[0].sample);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = linear_config(vec![16, 32], 10);
    for bad in [
        ExperimentConfig { n_grid: vec![32, 16], ..base.clone() },
        ExperimentConfig { n_grid: vec![], ..base.clone() },
        ExperimentConfig { reps_inner: 0, ..base.clone() },
        ExperimentConfig {
            rates: RateConfig { gamma: 1.5, ..RateConfig::default() },
            ..base.clone()
        },
    ] {
        assert!(bad.validate().is_err());
    }
    let err = ExperimentConfig {
        rates: RateConfig { gamma: 1.5, ..RateConfig::default() },
        ..base
    }
    .validate()
    .unwrap_err();
    assert!(err.to_string().contains("gamma must lie in (0,1)"));
}

/// `P(max(X1, X2) <= t)` for independent coordinates, one of which has
/// variance 1.2, against the standard-normal pair.
#[test]
fn diagonal_comparison_matches_product_cdf() {
    let phi = Normal::standard();
    let oracle = (0..=20_000)
        .map(|k| -8.0 + 16.0 * k as f64 / 20_000.0)
        .map(|t| (phi.cdf(t).powi(2) - phi.cdf(t) * phi.cdf(t / 1.2f64.sqrt())).abs())
        .fold(0.0, f64::max);
    let res = run_comparison_experiment(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.2], &[0.0, 0.0], 200_000, 3).unwrap();
    assert!((res.ks - oracle).abs() < 0.01, "{} vs {oracle}", res.ks);
    assert!((res.delta - 0.2).abs() < 1e-15);

    let same = run_comparison_experiment(&[1.0, 0.5, 0.5, 1.0], &[1.0, 0.5, 0.5, 1.0], &[0.0, 0.0], 50_000, 4).unwrap();
    assert_eq!(same.delta, 0.0);
    assert!(same.scaled_ratio.is_none());
    assert!(same.ks <= same.band);
}

#[test]
fn shared_coupling_respects_composed_bound() {
    let cfg = SharedCouplingConfig {
        dim: 3,
        epsilon: 0.5,
        n: 64,
        reps: 40_000,
        tau: 1.0,
        seed: 8,
        quantile: 0.95,
    };
    let rep = run_shared_coupling_experiment(&cfg).unwrap();
    assert!(rep.exceed_frac <= rep.r2 + 1e-12);
    assert!(rep.r1 > 0.0);
    assert!(rep.ks <= rep.bound, "{rep:?}");
}

#[test]
fn ks_of_identical_samples_is_zero() {
    let a: Vec<f64> = (0..100).map(|i| (i / 3) as f64).collect();
    assert_eq!(kolmogorov_distance(&a, &a).unwrap(), 0.0);
}

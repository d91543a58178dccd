//! Ready-to-run configurations.

use supcoupling::convex_prob::{ConvexMethod, ConvexSetSpec};
use supcoupling::coupling_lab::{BootstrapKind, ExperimentConfig, NetConfig, RateConfig};
use supcoupling::function_class::{DriftSpec, FunctionClassSpec};
use supcoupling::population::{Distribution, PopulationOptions};

use crate::config::{ComparisonSpec, ConvexSpec, ExperimentSpec, RunConfig};

pub const NAMES: [&str; 3] = ["remark1", "convex-halfspace", "comparison"];

pub fn preset(name: &str) -> Option<RunConfig> {
    match name {
        "remark1" => Some(remark1()),
        "convex-halfspace" => Some(convex_halfspace()),
        "comparison" => Some(comparison()),
        _ => None,
    }
}

/// Ball indicators on `[0,1]^2` under uniform data with zero drift. The
/// net mesh 0.32 gives about 100 members; `v = d + 2` is the VC index of
/// balls.
pub fn remark1_config() -> ExperimentConfig {
    ExperimentConfig {
        class: FunctionClassSpec::ball_indicators(2, [0.0, 1.0], [0.0, 2f64.sqrt()]),
        net: NetConfig {
            epsilon: 0.32,
            pool_size: 1000,
            probe_size: 10_000,
            max_members: None,
        },
        drift: DriftSpec::zero(0.1),
        data: Distribution::UniformCube,
        n_grid: vec![128, 2048],
        reps_outer: 4000,
        reps_inner: 4000,
        seed: 2024,
        population: PopulationOptions::default(),
        rates: RateConfig {
            v: 4.0,
            a_const: std::f64::consts::E,
            b: 1.0,
            sigma: 1.0,
            q: 4.0,
            gamma: 0.1,
        },
    }
}

fn remark1() -> RunConfig {
    let base = remark1_config();
    let cond = ExperimentConfig {
        n_grid: vec![2048],
        reps_outer: 10,
        ..base.clone()
    };
    RunConfig {
        threads: None,
        out_dir: None,
        experiments: vec![
            ExperimentSpec::Marginal {
                name: "remark1_marginal".into(),
                config: base,
            },
            ExperimentSpec::Conditional {
                name: "remark1_multiplier".into(),
                bootstrap: BootstrapKind::Multiplier,
                config: cond.clone(),
            },
            ExperimentSpec::Conditional {
                name: "remark1_empirical".into(),
                bootstrap: BootstrapKind::Empirical,
                config: cond,
            },
        ],
    }
}

fn convex_halfspace() -> RunConfig {
    RunConfig {
        threads: None,
        out_dir: None,
        experiments: vec![ExperimentSpec::Convex(ConvexSpec {
            name: "halfspace".into(),
            set: ConvexSetSpec::halfspace(vec![1.0, 0.0], 0.5),
            data: Distribution::StandardGaussian,
            n: 1024,
            sphere_net_eps: 0.1,
            methods: vec![ConvexMethod::Gaussian, ConvexMethod::DirectMc, ConvexMethod::MultiplierBootstrap],
            reps: 20_000,
            seed: 7,
        })],
    }
}

/// Equicorrelated (0.5) covariance against the identity, interpolated.
fn comparison() -> RunConfig {
    let p = 10;
    let cov_x = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.5 }).collect())
        .collect();
    let cov_y = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    RunConfig {
        threads: None,
        out_dir: None,
        experiments: vec![ExperimentSpec::Comparison(ComparisonSpec {
            name: "comparison".into(),
            mean: vec![0.0; p],
            cov_x,
            cov_y,
            t_grid: vec![0.0, 0.01, 0.04, 0.16],
            reps: 50_000,
            seed: 11,
        })],
    }
}

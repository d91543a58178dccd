//! Run configuration: a TOML file holding a list of experiments.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use supcoupling::bounds::{compute_kn, delta_rate, Rate};
use supcoupling::convex_prob::{ConvexMethod, ConvexSetSpec};
use supcoupling::coupling_lab::{BootstrapKind, ExperimentConfig, RateConfig, SharedCouplingConfig};
use supcoupling::function_class::DriftKind;
use supcoupling::population::Distribution;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Worker threads for replications; machine parallelism when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Marginal {
        name: String,
        #[serde(flatten)]
        config: ExperimentConfig,
    },
    Conditional {
        name: String,
        bootstrap: BootstrapKind,
        #[serde(flatten)]
        config: ExperimentConfig,
    },
    Comparison(ComparisonSpec),
    Convex(ConvexSpec),
    Tools(ToolsSpec),
}

/// `max` of `N(mean, cov_x)` against `max` of `N(mean, cov_y(t))` with
/// `cov_y(t) = (1 - t) cov_x + t cov_y` for each `t` in `t_grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSpec {
    pub name: String,
    pub mean: Vec<f64>,
    pub cov_x: Vec<Vec<f64>>,
    pub cov_y: Vec<Vec<f64>>,
    #[serde(default = "unit_grid")]
    pub t_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
}

fn unit_grid() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexSpec {
    pub name: String,
    pub set: ConvexSetSpec,
    pub data: Distribution,
    pub n: usize,
    pub sphere_net_eps: f64,
    pub methods: Vec<ConvexMethod>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolsSpec {
    pub name: String,
    pub seed: u64,
    pub suite: ToolSuite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToolSuite {
    /// Sandwich `max <= F_beta <= max + log(p)/beta` on random inputs.
    Softmax { trials: usize, max_p: usize },
    /// Sandwich and derivative bounds of the smoothed indicator of `[0,1]`.
    Mollifier { deltas: Vec<f64>, grid_points: usize },
    /// Monte Carlo concentration of Gaussian maxima against the density bound.
    Nazarov {
        configs: usize,
        max_p: usize,
        min_var: f64,
        epsilon: f64,
        draws: usize,
        grid_points: usize,
    },
    /// `K_n` and the three rates over a grid of `n`.
    Rates {
        rates: RateConfig,
        n_b_eta: f64,
        eta: f64,
        n_grid: Vec<u64>,
    },
    /// Observable coupling of `Z` and `Z~` and the composed Kolmogorov bound.
    SharedCoupling(SharedCouplingConfig),
}

impl ExperimentSpec {
    pub fn name(&self) -> &str {
        match self {
            ExperimentSpec::Marginal { name, .. } | ExperimentSpec::Conditional { name, .. } => name,
            ExperimentSpec::Comparison(c) => &c.name,
            ExperimentSpec::Convex(c) => &c.name,
            ExperimentSpec::Tools(t) => &t.name,
        }
    }

    pub fn type_label(&self) -> &'static str {
        match self {
            ExperimentSpec::Marginal { .. } => "marginal",
            ExperimentSpec::Conditional { .. } => "conditional",
            ExperimentSpec::Comparison(_) => "comparison",
            ExperimentSpec::Convex(_) => "convex",
            ExperimentSpec::Tools(_) => "tools",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentSpec::Marginal { config, .. } | ExperimentSpec::Conditional { config, .. } => config.seed,
            ExperimentSpec::Comparison(c) => c.seed,
            ExperimentSpec::Convex(c) => c.seed,
            ExperimentSpec::Tools(t) => t.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentSpec::Marginal { config, .. } | ExperimentSpec::Conditional { config, .. } => config.seed = seed,
            ExperimentSpec::Comparison(c) => c.seed = seed,
            ExperimentSpec::Convex(c) => c.seed = seed,
            ExperimentSpec::Tools(t) => {
                t.seed = seed;
                if let ToolSuite::SharedCoupling(s) = &mut t.suite {
                    s.seed = seed;
                }
            }
        }
    }
}

/// Findings from validation. Errors block a run; warnings do not.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub errors: Vec<FieldError>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl Diagnostics {
    fn error(&mut self, field: String, message: impl Into<String>) {
        self.errors.push(FieldError {
            field,
            message: message.into(),
        });
    }

    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn square(m: &[Vec<f64>], p: usize) -> bool {
    m.len() == p && m.iter().all(|r| r.len() == p && r.iter().all(|v| v.is_finite()))
}

pub fn flatten(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 over the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes to JSON");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        if self.threads == Some(0) {
            d.error("threads".into(), "threads must be >= 1");
        }
        let mut names = std::collections::HashSet::new();
        for (i, exp) in self.experiments.iter().enumerate() {
            let at = |f: &str| format!("experiments[{i}].{f}");
            if exp.name().is_empty() || !exp.name().chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                d.error(at("name"), "name must be nonempty ASCII letters, digits, '_' or '-'");
            }
            if !names.insert(exp.name().to_string()) {
                d.error(at("name"), format!("duplicate experiment name {:?}", exp.name()));
            }
            if exp.seed() > i64::MAX as u64 {
                d.error(at("seed"), "seed must fit in a signed 64-bit integer");
            }
            match exp {
                ExperimentSpec::Marginal { config, .. } | ExperimentSpec::Conditional { config, .. } => {
                    if let Err(e) = config.validate() {
                        d.error(at("config"), e.to_string());
                        continue;
                    }
                    side_condition_warnings(exp, config, &mut d);
                }
                ExperimentSpec::Comparison(c) => {
                    let p = c.mean.len();
                    if p == 0 {
                        d.error(at("mean"), "mean must be nonempty");
                    }
                    if !square(&c.cov_x, p) {
                        d.error(at("cov_x"), format!("cov_x must be a finite {p}x{p} matrix"));
                    }
                    if !square(&c.cov_y, p) {
                        d.error(at("cov_y"), format!("cov_y must be a finite {p}x{p} matrix"));
                    }
                    if c.t_grid.is_empty() || c.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
                        d.error(at("t_grid"), "t_grid must be nonempty with values in [0,1]");
                    }
                    if c.reps == 0 {
                        d.error(at("reps"), "reps must be >= 1");
                    }
                }
                ExperimentSpec::Convex(c) => {
                    if let Err(e) = c.set.validate() {
                        d.error(at("set"), e.to_string());
                    }
                    if let Err(e) = c.data.validate(c.set.dim) {
                        d.error(at("data"), e.to_string());
                    }
                    if c.n == 0 || c.reps == 0 {
                        d.error(at("n"), "n and reps must be >= 1");
                    }
                    if !(c.sphere_net_eps > 0.0) {
                        d.error(at("sphere_net_eps"), "sphere_net_eps must be > 0");
                    }
                    if c.methods.is_empty() {
                        d.error(at("methods"), "methods must be nonempty");
                    }
                }
                ExperimentSpec::Tools(t) => validate_suite(&t.suite, &at("suite"), &mut d),
            }
        }
        d
    }
}

fn side_condition_warnings(exp: &ExperimentSpec, cfg: &ExperimentConfig, d: &mut Diagnostics) {
    let exact = matches!(cfg.drift.kind, DriftKind::Zero);
    let rate = match exp {
        ExperimentSpec::Conditional {
            bootstrap: BootstrapKind::Multiplier,
            ..
        } => Rate::D2,
        ExperimentSpec::Conditional { .. } => Rate::D3,
        _ => Rate::D1,
    };
    for &n in &cfg.n_grid {
        let p = cfg.rates.params(n as u64, 1.0, cfg.drift.eta);
        let r = delta_rate(&p, rate);
        if !r.side_condition_ok {
            let cond = if rate == Rate::D2 { "K_n <= n" } else { "K_n^3 <= n" };
            let note = if exact { "" } else { " (N_B(eta) taken as 1)" };
            d.warnings.push(format!(
                "experiment {:?}: side condition {cond} fails at n = {n}, K_n = {:.4}{note}",
                exp.name(),
                compute_kn(&p)
            ));
        }
    }
}

fn validate_suite(suite: &ToolSuite, at: &str, d: &mut Diagnostics) {
    let f = |s: &str| format!("{at}.{s}");
    match suite {
        ToolSuite::Softmax { trials, max_p } => {
            if *trials == 0 || *max_p == 0 {
                d.error(f("trials"), "trials and max_p must be >= 1");
            }
        }
        ToolSuite::Mollifier { deltas, grid_points } => {
            if deltas.is_empty() || deltas.iter().any(|v| !(*v > 0.0)) {
                d.error(f("deltas"), "deltas must be nonempty and positive");
            }
            if *grid_points < 2 {
                d.error(f("grid_points"), "grid_points must be >= 2");
            }
        }
        ToolSuite::Nazarov {
            configs,
            max_p,
            min_var,
            epsilon,
            draws,
            grid_points,
        } => {
            if *configs == 0 || *max_p == 0 || *draws == 0 || *grid_points < 2 {
                d.error(f("configs"), "configs, max_p, draws must be >= 1 and grid_points >= 2");
            }
            if !(*min_var > 0.0) || !(*epsilon > 0.0) {
                d.error(f("min_var"), "min_var and epsilon must be > 0");
            }
        }
        ToolSuite::Rates {
            rates,
            n_b_eta,
            eta,
            n_grid,
        } => {
            if n_grid.is_empty() {
                d.error(f("n_grid"), "n_grid must be nonempty");
            }
            for &n in n_grid {
                if let Err(e) = rates.params(n, *n_b_eta, *eta).validate() {
                    d.error(f("rates"), e.to_string());
                    break;
                }
            }
        }
        ToolSuite::SharedCoupling(c) => {
            if c.dim == 0 || c.n == 0 || c.reps < 20 || !(c.epsilon > 0.0) {
                d.error(f("dim"), "need dim >= 1, n >= 1, reps >= 20, epsilon > 0");
            }
            if !(c.quantile > 0.0 && c.quantile < 1.0) || !(c.tau >= 0.0) {
                d.error(f("quantile"), "quantile must lie in (0,1) and tau >= 0");
            }
        }
    }
}

//! Executes a validated configuration and writes one CSV per experiment plus
//! `manifest.json`.

use std::path::{Path, PathBuf};

use supcoupling::convex_prob::{convex_probability, ConvexMethod, ConvexOptions};
use supcoupling::coupling_lab::{
    run_comparison_experiment, run_conditional_experiment, run_marginal_experiment, DistanceReport,
};

use crate::config::{flatten, ComparisonSpec, ConvexSpec, ExperimentSpec, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_num, Manifest, OutputEntry, Table, Versions};
use crate::suites::run_suite;

/// Environment variable overriding the output directory of the config file.
pub const OUT_DIR_ENV: &str = "SUPCOUPLING_OUT_DIR";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// `--out` beats the environment variable, which beats `out_dir` in the
/// config; the default is `./results`.
pub fn resolve_out_dir(cli: Option<&Path>, env: Option<String>, config: Option<&str>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(e) = env.filter(|e| !e.is_empty()) {
        return PathBuf::from(e);
    }
    PathBuf::from(config.unwrap_or("results"))
}

/// Applies overrides and validates; the result is what gets hashed and run.
pub fn effective_config(mut config: RunConfig, opts: &RunOptions) -> Result<(RunConfig, Vec<String>), CliError> {
    if let Some(seed) = opts.seed {
        config.experiments.iter_mut().for_each(|e| e.set_seed(seed));
    }
    if let Some(t) = opts.threads {
        config.threads = Some(t);
    }
    let diag = config.validate();
    if !diag.is_ok() {
        let mut err = CliError::config(format!("{} invalid field(s)", diag.errors.len()));
        err.fields = diag.errors;
        return Err(err);
    }
    Ok((config, diag.warnings))
}

pub fn run(config: RunConfig, opts: &RunOptions) -> Result<Manifest, CliError> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let (config, warnings) = effective_config(config, opts)?;
    let hash = config.hash();
    let out_dir = resolve_out_dir(
        opts.out_dir.as_deref(),
        std::env::var(OUT_DIR_ENV).ok(),
        config.out_dir.as_deref(),
    );
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(format!("{}: {e}", out_dir.display())))?;

    let threads = config.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;

    let mut outputs = Vec::with_capacity(config.experiments.len());
    for exp in &config.experiments {
        let table = pool
            .install(|| experiment_table(exp, &hash))
            .map_err(|e| e.in_experiment(exp.name()))?;
        let path = out_dir.join(format!("{}.csv", exp.name()));
        table.write(&path)?;
        outputs.push(OutputEntry {
            experiment: exp.name().to_string(),
            kind: exp.type_label().to_string(),
            seed: exp.seed(),
            path,
            rows: table.rows.len(),
        });
    }

    let manifest = Manifest {
        config_path: opts.config_path.clone(),
        config_hash: hash,
        seed_override: opts.seed,
        threads,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        versions: Versions::current(),
        warnings,
        outputs,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

const PREFIX: [&str; 3] = ["seed", "config_hash", "experiment"];

fn with_prefix(cols: &[&str]) -> Table {
    let header: Vec<&str> = PREFIX.iter().chain(cols).copied().collect();
    Table::new(&header)
}

/// Builds the CSV table of one experiment.
pub fn experiment_table(exp: &ExperimentSpec, hash: &str) -> Result<Table, CliError> {
    let prefix = vec![exp.seed().to_string(), hash.to_string(), exp.name().to_string()];
    let line = |rest: Vec<String>| prefix.iter().cloned().chain(rest).collect::<Vec<_>>();
    match exp {
        ExperimentSpec::Marginal { config, .. } => {
            let report = run_marginal_experiment(config)?;
            Ok(distance_table(&report, line))
        }
        ExperimentSpec::Conditional { config, bootstrap, .. } => {
            let report = run_conditional_experiment(config, *bootstrap)?;
            Ok(distance_table(&report, line))
        }
        ExperimentSpec::Comparison(c) => comparison_table(c, line),
        ExperimentSpec::Convex(c) => convex_table(c, line),
        ExperimentSpec::Tools(t) => {
            let mut table = with_prefix(&["suite", "item", "metric", "value"]);
            let suite = serde_json::to_value(&t.suite).expect("suite serializes")["kind"]
                .as_str()
                .unwrap_or("")
                .to_string();
            for (item, metric, value) in run_suite(&t.suite, t.seed)? {
                table.push(line(vec![suite.clone(), item, metric, value]));
            }
            Ok(table)
        }
    }
}

fn distance_table(report: &DistanceReport, line: impl Fn(Vec<String>) -> Vec<String>) -> Table {
    let mut table = with_prefix(&[
        "n",
        "kind",
        "KS",
        "se",
        "KS_median",
        "KS_p90",
        "K_n",
        "delta1",
        "delta2",
        "delta3",
        "side_condition_ok",
        "net_size",
        "probe_size",
        "reference_size",
        "reps_outer",
        "reps_inner",
        "fit_slope",
    ]);
    let slope = report.fit.map(|f| fmt_num(f.slope)).unwrap_or_default();
    for r in &report.rows {
        table.push(line(vec![
            r.n.to_string(),
            r.kind.label().to_string(),
            fmt_num(r.ks),
            fmt_num(r.se),
            fmt_num(r.ks_median),
            fmt_num(r.ks_p90),
            fmt_num(r.kn),
            fmt_num(r.delta1),
            fmt_num(r.delta2),
            fmt_num(r.delta3),
            r.side_condition_ok.to_string(),
            report.net_size.to_string(),
            report.probe_size.to_string(),
            report.reference_size.to_string(),
            report.reps_outer.to_string(),
            report.reps_inner.to_string(),
            slope.clone(),
        ]));
    }
    table
}

fn comparison_table(c: &ComparisonSpec, line: impl Fn(Vec<String>) -> Vec<String>) -> Result<Table, CliError> {
    let mut table = with_prefix(&["t", "p", "KS", "se", "delta", "KS_over_sqrt_delta_log_p"]);
    let (x, y) = (flatten(&c.cov_x), flatten(&c.cov_y));
    for &t in &c.t_grid {
        let yt: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        // common random numbers across t
        let res = run_comparison_experiment(&x, &yt, &c.mean, c.reps, c.seed)?;
        table.push(line(vec![
            fmt_num(t),
            res.p.to_string(),
            fmt_num(res.ks),
            fmt_num(res.band),
            fmt_num(res.delta),
            res.scaled_ratio.map(fmt_num).unwrap_or_default(),
        ]));
    }
    Ok(table)
}

fn convex_table(c: &ConvexSpec, line: impl Fn(Vec<String>) -> Vec<String>) -> Result<Table, CliError> {
    let mut table = with_prefix(&[
        "method",
        "n",
        "prob",
        "se",
        "refined_prob",
        "net_bias",
        "net_size",
        "refined_net_size",
    ]);
    for &method in &c.methods {
        let opts = ConvexOptions {
            n: c.n,
            sphere_net_eps: c.sphere_net_eps,
            method,
            reps: c.reps,
            seed: c.seed,
        };
        let est = convex_probability(&c.set, &c.data, &opts)?;
        let label = match method {
            ConvexMethod::DirectMc => "direct_mc",
            ConvexMethod::Gaussian => "gaussian",
            ConvexMethod::MultiplierBootstrap => "multiplier_bootstrap",
        };
        table.push(line(vec![
            label.to_string(),
            c.n.to_string(),
            fmt_num(est.prob),
            fmt_num(est.se),
            fmt_num(est.refined_prob),
            fmt_num(est.net_bias),
            est.net_size.to_string(),
            est.refined_net_size.to_string(),
        ]));
    }
    Ok(table)
}

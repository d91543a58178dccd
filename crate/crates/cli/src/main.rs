use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use supcoupling_cli::{presets, run, CliError, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "supcoupling", version, about = "Monte Carlo experiments on suprema of empirical processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a config file.
    Run {
        config: PathBuf,
        /// Replace the seed of every experiment.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the environment and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check a config file without running it.
    Validate { config: PathBuf },
    /// Print a ready-made config.
    Preset {
        #[arg(value_parser = presets::NAMES)]
        name: String,
    },
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let opts = RunOptions {
                config_path: Some(config),
                seed,
                out_dir: out,
                threads,
            };
            match run(cfg, &opts) {
                Ok(manifest) => {
                    for w in &manifest.warnings {
                        eprintln!("warning: {w}");
                    }
                    for o in &manifest.outputs {
                        println!("{}", o.path.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let diag = cfg.validate();
            println!("{}", serde_json::to_string_pretty(&diag).expect("diagnostics serialize"));
            if diag.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::Preset { name } => {
            let cfg = presets::preset(&name).expect("name checked by clap");
            print!("{}", cfg.to_toml());
            ExitCode::SUCCESS
        }
    }
}

//! Configuration, orchestration and serialization for `supcoupling`
//! experiments.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runner;
pub mod suites;

pub use config::{Diagnostics, ExperimentSpec, RunConfig};
pub use error::{CliError, ErrorKind};
pub use runner::{run, RunOptions, OUT_DIR_ENV};

//! Suprema of empirical, bootstrap and Gaussian processes indexed by
//! discretized VC-type function classes.
//!
//! The crate is organised around a finite [`Net`](function_class::Net) of
//! functions. Every process is evaluated on that net:
//!
//! * [`process_engine`] computes the empirical process supremum `Z`, the
//!   multiplier bootstrap supremum `Z^e` and the empirical bootstrap
//!   supremum `Z^*`;
//! * [`gaussian_kernel`] builds the covariance of the limiting Gaussian
//!   process and samples its supremum `Z~`;
//! * [`coupling_lab`] runs Monte Carlo experiments comparing these laws in
//!   Kolmogorov distance;
//! * [`bounds`] evaluates the rate expressions and anti-concentration bounds;
//! * [`smooth_approx`] holds the smooth max and mollified indicator;
//! * [`convex_prob`] applies the machinery to probabilities of convex sets.

pub mod bounds;
pub mod convex_prob;
pub mod coupling_lab;
pub mod error;
pub mod function_class;
pub mod gaussian_kernel;
pub mod population;
pub mod process_engine;
pub mod rng;
pub mod smooth_approx;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

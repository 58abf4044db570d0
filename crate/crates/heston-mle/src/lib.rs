//! Closed-form approximate maximum-likelihood estimation for the
//! parameters of the Heston stochastic volatility model, from discretely
//! sub-sampled joint observations of price and squared volatility.
//!
//! The crate covers:
//!
//! - parameter domains, rescaling invariances, and the canonical
//!   `(omega, zeta)` form ([`params`]);
//! - the five sufficient statistics of a variance path and the genericity
//!   classification of the discretized likelihood ([`stats`]);
//! - closed-form raw estimators, their bias-corrected consistent versions,
//!   drift and leverage estimation ([`estimate`]);
//! - exact noncentral chi-square transition sampling and Euler paths for
//!   the CIR variance process ([`simulate`]);
//! - a Monte Carlo accuracy harness with relative-RMS tables, sqrt(N)
//!   constants, and distributional diagnostics ([`montecarlo`]);
//! - market-data ingestion with a Garman-Klass variance proxy
//!   ([`ingest`]), and a command-line front end ([`cli`]).

pub mod cli;
pub mod error;
pub mod estimate;
pub mod ingest;
pub mod montecarlo;
pub mod params;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};

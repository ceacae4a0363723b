//! Bayesian estimation of asymmetric GJR-GARCH(1,1) volatility models.
//!
//! The crate provides:
//!
//! - standardized innovation distributions (normal, Student-t, GED,
//!   generalized-t) with analytic log-density gradients ([`distributions`]);
//! - the GJR-GARCH(1,1) variance recursion, truncated-normal priors,
//!   unconstraining parameter transforms and the analytic gradient of the
//!   unconstrained log-posterior ([`model`]);
//! - Hamiltonian Monte Carlo and pilot-tuned random-walk Metropolis samplers
//!   ([`samplers`]);
//! - zero-variance control-variate post-processing of posterior expectations
//!   ([`zv`]);
//! - case-deletion influence diagnostics via Kullback-Leibler divergence
//!   ([`diagnostics`]);
//! - model-comparison criteria (DIC, EAIC, EBIC, WAIC, LOOIC) ([`criteria`]);
//! - data generation and the bias/standard-error simulation study
//!   ([`simulate`]).
//!
//! With the default `parallel` feature, study replications, influence scans
//! and batch evaluations fan out over a rayon thread pool; disabling the
//! feature yields a fully sequential build with identical results.

pub mod criteria;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod exec;
pub mod model;
pub mod samplers;
pub mod simulate;
pub mod zv;

pub use error::{Error, Result};

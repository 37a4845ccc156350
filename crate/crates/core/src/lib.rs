//! Bayesian multivariate quantile regression (quantile VAR) with constant,
//! stochastic-volatility and GARCH(1,1) scale dynamics.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`]: quantile parametrization, regression design, scale factorization.
//! * [`distributions`]: GiG, multivariate asymmetric Laplace, skew-t samplers
//!   and quadrature-based density oracles.
//! * [`adapt`]: adaptive random-walk Metropolis–Hastings with Robbins–Monro scaling.
//! * [`mcmc`]: the Metropolis-within-Gibbs sampler for the three regimes.
//! * [`forecast`]: rolling-window quantile forecasting.
//! * [`evaluate`]: quantile scores, Diebold–Mariano tests, score-weighted combinations.
//! * [`data`]: CSV ingestion and transforms.
//! * [`simstudy`]: Monte Carlo study harness.

pub mod adapt;
pub mod data;
pub mod distributions;
pub mod domain;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod forecast;
pub mod mcmc;
pub mod quadrature;
pub mod simstudy;

pub use error::{Error, Result};
pub use exec::Execution;

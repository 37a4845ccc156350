//! Shared domain types used by every volatility regime.

mod design;
mod quantile;
mod scale;

pub use design::{build_var_design, location, regressors_from_history, RegressionDesign};
pub use quantile::{tau_from_theta1, theta_params, QuantileLevels, ThetaParams};
pub use scale::{implied_sigma, invert_unit_lower, ScaleDecomposition};

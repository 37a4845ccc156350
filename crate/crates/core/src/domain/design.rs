use nalgebra::DMatrix;

use crate::data::TimeSeriesPanel;
use crate::error::{Error, Result};

/// Aligned responses and regressors of a quantile VAR.
///
/// Row `t` of `x` is x_t = [1, y_{t−1}ᵀ, …, y_{t−p}ᵀ] (intercept optional) and the
/// per-time design is X_t = I_n ⊗ x_tᵀ. Coefficients are stored equation-major:
/// `beta[j * k + i]` multiplies regressor `i` in equation `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDesign {
    pub y: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub n: usize,
    pub k: usize,
    pub lag_order: usize,
    pub intercept: bool,
}

impl RegressionDesign {
    /// Builds a design from already aligned rows (used for generic regressions).
    pub fn from_parts(y: Vec<Vec<f64>>, x: Vec<Vec<f64>>, intercept: bool) -> Result<Self> {
        if y.len() != x.len() || y.is_empty() {
            return Err(Error::Dimension(format!("{} responses vs {} regressor rows", y.len(), x.len())));
        }
        let n = y[0].len();
        let k = x[0].len();
        if n == 0 || k == 0 {
            return Err(Error::Dimension("empty response or regressor vector".into()));
        }
        for (t, (yt, xt)) in y.iter().zip(&x).enumerate() {
            if yt.len() != n || xt.len() != k {
                return Err(Error::Dimension(format!("ragged row at t={t}")));
            }
            if let Some(c) = yt.iter().chain(xt).position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: t, column: c });
            }
        }
        Ok(Self { y, x, n, k, lag_order: 0, intercept })
    }

    /// Number of usable time points.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_coefficients(&self) -> usize {
        self.n * self.k
    }

    /// Dense X_t (n × nk).
    pub fn x_matrix(&self, t: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n * self.k);
        for j in 0..self.n {
            for i in 0..self.k {
                m[(j, j * self.k + i)] = self.x[t][i];
            }
        }
        m
    }

    /// X_t β.
    pub fn location(&self, beta: &[f64], t: usize) -> Vec<f64> {
        location(beta, &self.x[t], self.n)
    }

    /// y_t − X_t β.
    pub fn residual(&self, beta: &[f64], t: usize) -> Vec<f64> {
        let loc = self.location(beta, t);
        self.y[t].iter().zip(loc).map(|(y, m)| y - m).collect()
    }
}

/// X β for a single regressor row `x` (length k) and `n` equations.
pub fn location(beta: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    let k = x.len();
    (0..n)
        .map(|j| beta[j * k..(j + 1) * k].iter().zip(x).map(|(b, v)| b * v).sum())
        .collect()
}

/// Aligned (y_t, x_t) pairs for t = p+1, …, T.
pub fn build_var_design(panel: &TimeSeriesPanel, lag_order: usize, intercept: bool) -> Result<RegressionDesign> {
    let t_total = panel.len();
    if t_total < lag_order + 2 {
        return Err(Error::InsufficientData(format!(
            "{t_total} rows, lag order {lag_order} needs at least {}",
            lag_order + 2
        )));
    }
    if !intercept && lag_order == 0 {
        return Err(Error::InvalidParameter("design has no regressors".into()));
    }
    for (r, row) in panel.values.iter().enumerate() {
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, column: c });
        }
    }
    let n = panel.n_vars();
    let mut y = Vec::with_capacity(t_total - lag_order);
    let mut x = Vec::with_capacity(t_total - lag_order);
    for t in lag_order..t_total {
        y.push(panel.values[t].clone());
        x.push(regressors_from_history(&panel.values[..t], lag_order, intercept)?);
    }
    let k = x[0].len();
    Ok(RegressionDesign { y, x, n, k, lag_order, intercept })
}

/// The regressor vector for the period following `history` (most recent row last).
pub fn regressors_from_history(history: &[Vec<f64>], lag_order: usize, intercept: bool) -> Result<Vec<f64>> {
    if history.len() < lag_order {
        return Err(Error::InsufficientData(format!(
            "{} rows of history for lag order {lag_order}",
            history.len()
        )));
    }
    let mut x = Vec::new();
    if intercept {
        x.push(1.0);
    }
    for l in 1..=lag_order {
        x.extend_from_slice(&history[history.len() - l]);
    }
    Ok(x)
}

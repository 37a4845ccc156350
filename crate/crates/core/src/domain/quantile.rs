use crate::error::{Error, Result};

/// Per-series quantile levels, each strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::Dimension("quantile levels must be non-empty".into()));
        }
        for (index, &t) in tau.iter().enumerate() {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidQuantile { index, tau: t });
            }
        }
        Ok(Self(tau))
    }

    /// The same level for all `n` series.
    pub fn uniform(tau: f64, n: usize) -> Result<Self> {
        Self::new(vec![tau; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `count` equally spaced levels from `lo` to `hi` inclusive.
    pub fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => {
                let step = (hi - lo) / (count - 1) as f64;
                (0..count).map(|i| lo + step * i as f64).collect()
            }
        }
    }
}

/// Skew and scale constants of the constrained asymmetric Laplace law.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
}

impl ThetaParams {
    pub fn len(&self) -> usize {
        self.theta1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta1.is_empty()
    }
}

/// θ₁ = (1−2τ)/(τ(1−τ)), θ₂ = √(2/(τ(1−τ))).
pub fn theta_params(levels: &QuantileLevels) -> ThetaParams {
    let (theta1, theta2) = levels
        .as_slice()
        .iter()
        .map(|&t| {
            let v = t * (1.0 - t);
            ((1.0 - 2.0 * t) / v, (2.0 / v).sqrt())
        })
        .unzip();
    ThetaParams { theta1, theta2 }
}

/// Recovers τ from θ₁ (the root of θ₁τ² − (θ₁+2)τ + 1 = 0 inside (0, 1)).
pub fn tau_from_theta1(theta1: f64) -> f64 {
    2.0 / ((theta1 + 2.0) + (theta1 * theta1 + 4.0).sqrt())
}

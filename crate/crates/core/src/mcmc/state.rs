use nalgebra::DMatrix;

use super::config::Regime;
use crate::adapt::AdaptiveScale;
use crate::distributions::GarchStatics;

/// Regime-specific volatility state. Paths are stored series-major (n × T).
#[derive(Debug, Clone, PartialEq)]
pub enum VolState {
    Const { delta2: Vec<f64> },
    Sv { h: Vec<Vec<f64>>, phi: Vec<f64>, sigma2_h: Vec<f64> },
    Garch { statics: Vec<GarchStatics>, sigma2: Vec<Vec<f64>>, sigma2_init: Vec<f64> },
}

impl VolState {
    pub fn regime(&self) -> Regime {
        match self {
            VolState::Const { .. } => Regime::Const,
            VolState::Sv { .. } => Regime::Sv,
            VolState::Garch { .. } => Regime::Garch,
        }
    }

    /// H_{t,jj}.
    pub fn variance(&self, j: usize, t: usize) -> f64 {
        match self {
            VolState::Const { delta2 } => delta2[j],
            VolState::Sv { h, .. } => h[j][t].exp(),
            VolState::Garch { sigma2, .. } => sigma2[j][t],
        }
    }

    /// Standard deviations H_t^{1/2}, time-major (T × n).
    pub fn std_devs(&self, n: usize, len: usize) -> Vec<Vec<f64>> {
        (0..len).map(|t| (0..n).map(|j| self.variance(j, t).sqrt()).collect()).collect()
    }

    /// Standard deviation path of series j.
    pub fn std_dev_path(&self, j: usize, len: usize) -> Vec<f64> {
        (0..len).map(|t| self.variance(j, t).sqrt()).collect()
    }
}

/// Adaptive proposal scales, one per MH block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptState {
    /// SV h-paths, GARCH parameter triples or constant variances (one per series).
    pub vol: Vec<AdaptiveScale>,
    /// Fixed proposal variance S of each volatility block (diagonal, per coordinate).
    pub vol_base: Vec<f64>,
    /// SV persistence (one per series).
    pub phi: Vec<AdaptiveScale>,
    /// GARCH mixing variables (one per time point).
    pub w: Vec<AdaptiveScale>,
    /// GARCH coefficient block.
    pub beta: AdaptiveScale,
}

impl AdaptState {
    pub fn freeze(&mut self) {
        for s in self.vol.iter_mut().chain(self.phi.iter_mut()).chain(self.w.iter_mut()) {
            s.freeze();
        }
        self.beta.freeze();
    }
}

/// One full parameter configuration of the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcState {
    pub beta: Vec<f64>,
    /// Ā = A⁻¹ (unit lower triangular), the sampled object.
    pub a_bar: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub w: Vec<f64>,
    pub vol: VolState,
    pub adapt: AdaptState,
}

impl McmcState {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Free entries of Ā by row: row j holds ā_{j,1..j−1}.
    pub fn a_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|j| (0..j).map(|l| self.a_bar[(j, l)]).collect()).collect()
    }

    pub fn std_devs(&self) -> Vec<Vec<f64>> {
        self.vol.std_devs(self.n(), self.len())
    }

    /// Checks every structural invariant; returns the name of the offending block.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err("beta");
        }
        if self.w.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err("w");
        }
        let n = self.n();
        for i in 0..n {
            if self.a_bar[(i, i)] != 1.0 || self.a[(i, i)] != 1.0 {
                return Err("A");
            }
            for j in 0..n {
                if j > i && (self.a_bar[(i, j)] != 0.0 || self.a[(i, j)] != 0.0) {
                    return Err("A");
                }
                if !self.a_bar[(i, j)].is_finite() || !self.a[(i, j)].is_finite() {
                    return Err("A");
                }
            }
        }
        match &self.vol {
            VolState::Const { delta2 } => {
                if delta2.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
                    return Err("vol");
                }
            }
            VolState::Sv { h, phi, sigma2_h } => {
                if phi.iter().any(|p| !(p.abs() < 1.0)) {
                    return Err("phi");
                }
                if sigma2_h.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err("sigma2_h");
                }
                if h.iter().flatten().any(|v| !v.is_finite() || !v.exp().is_finite() || v.exp() <= 0.0) {
                    return Err("vol");
                }
            }
            VolState::Garch { statics, sigma2, .. } => {
                if statics.iter().any(|s| !s.is_valid()) {
                    return Err("vol");
                }
                if sigma2.iter().flatten().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err("vol");
                }
            }
        }
        Ok(())
    }
}

use crate::distributions::GarchPrior;
use crate::domain::QuantileLevels;
use crate::error::{Error, Result};

/// Volatility dynamics of the scale matrices H_t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// H_t ≡ diag(δ²): the plain quantile VAR.
    Const,
    Sv,
    Garch,
}

impl Regime {
    /// Identifier used in forecast records and reports.
    pub fn model_id(self) -> &'static str {
        match self {
            Regime::Const => "QVAR",
            Regime::Sv => "QVAR-SV",
            Regime::Garch => "QVAR-GARCH",
        }
    }

    pub fn from_model_id(id: &str) -> Option<Self> {
        match id.to_ascii_uppercase().as_str() {
            "QVAR" | "CONST" => Some(Regime::Const),
            "QVAR-SV" | "SV" => Some(Regime::Sv),
            "QVAR-GARCH" | "GARCH" => Some(Regime::Garch),
            _ => None,
        }
    }
}

/// Gibbs blocks; `Vol` is the regime-specific volatility update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    Beta,
    A,
    W,
    Vol,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvPrior {
    /// Beta(a_ρ, b_ρ) on (1 + φ)/2.
    pub a_rho: f64,
    pub b_rho: f64,
    /// Inverse-gamma(a_σ, b_σ) on σ²_h (shape, rate).
    pub a_sigma: f64,
    pub b_sigma: f64,
}

impl Default for SvPrior {
    fn default() -> Self {
        Self { a_rho: 20.0, b_rho: 1.5, a_sigma: 2.5, b_sigma: 0.075 }
    }
}

/// Inverse-gamma (shape, rate) prior on the constant variances δ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for ConstPrior {
    fn default() -> Self {
        Self { shape: 1.0, rate: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    /// β ~ N(beta_mean·𝟙, beta_var·I).
    pub beta_mean: f64,
    pub beta_var: f64,
    /// Free entries of each row of A⁻¹ ~ N(a_mean, a_var) independently.
    pub a_mean: f64,
    pub a_var: f64,
    pub sv: SvPrior,
    pub garch: GarchPrior,
    pub constant: ConstPrior,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            beta_mean: 0.0,
            beta_var: 10.0,
            a_mean: 0.0,
            a_var: 10.0,
            sv: SvPrior::default(),
            garch: GarchPrior::default(),
            constant: ConstPrior::default(),
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.beta_var,
            self.a_var,
            self.sv.a_rho,
            self.sv.b_rho,
            self.sv.a_sigma,
            self.sv.b_sigma,
            self.constant.shape,
            self.constant.rate,
        ];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("prior scale parameters must be positive".into()));
        }
        self.garch.validate()
    }
}

/// Initial variance of the GARCH recursion.
#[derive(Debug, Clone, PartialEq)]
pub enum GarchInit {
    /// ω/(1 − α − γ) of the current parameters.
    Unconditional,
    Fixed(Vec<f64>),
}

/// Blocks held at their initial values (used for diagnostics and conditional checks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FixedBlocks {
    pub beta: bool,
    pub a: bool,
    pub w: bool,
    /// h-paths, GARCH parameters or constant variances.
    pub vol: bool,
    pub phi: bool,
    pub sigma2_h: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    /// Stop scale adaptation at the end of burn-in.
    pub freeze_adaptation: bool,
    pub sweep_order: Vec<Block>,
    /// Sample the h-paths of all series concurrently, each conditioning on the
    /// previous sweep's paths of the other series (approximate).
    pub sv_parallel: bool,
    pub garch_init: GarchInit,
    /// Target acceptance of the whole-path h proposals.
    pub target_h: f64,
    /// Target acceptance of every other adaptive block.
    pub target_mh: f64,
    pub fixed: FixedBlocks,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 5000,
            keep: 5000,
            thin: 1,
            freeze_adaptation: true,
            sweep_order: vec![Block::Beta, Block::A, Block::W, Block::Vol],
            sv_parallel: false,
            garch_init: GarchInit::Unconditional,
            target_h: 0.27,
            target_mh: 0.30,
            fixed: FixedBlocks::default(),
        }
    }
}

impl McmcConfig {
    pub fn total_iterations(&self) -> usize {
        self.burn_in + self.keep * self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.keep == 0 || self.thin == 0 {
            return Err(Error::InvalidParameter("keep and thin must be positive".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if self.sweep_order.len() != 4 || !self.sweep_order.iter().all(|b| seen.insert(*b)) {
            return Err(Error::InvalidParameter("sweep order must list each block exactly once".into()));
        }
        for t in [self.target_h, self.target_mh] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter(format!("target acceptance {t} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Everything needed to fit one model at one vector of quantile levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub regime: Regime,
    pub levels: QuantileLevels,
    pub lag_order: usize,
    pub intercept: bool,
    pub priors: Priors,
    pub mcmc: McmcConfig,
}

impl ModelSpec {
    pub fn new(regime: Regime, levels: QuantileLevels) -> Self {
        Self { regime, levels, lag_order: 1, intercept: true, priors: Priors::default(), mcmc: McmcConfig::default() }
    }
}

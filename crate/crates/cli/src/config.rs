//! TOML run configuration.
//!
//! Every section is optional and every key has a default. Environment variables
//! named `QVAR_<SECTION>_<KEY>` override file values, for example
//! `QVAR_MCMC_BURN_IN=2000` or `QVAR_BACKTEST_HORIZONS=[1,2]`.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use qvar::data::SubPeriod;
use qvar::distributions::GarchPrior;
use qvar::domain::QuantileLevels;
use qvar::forecast::{BacktestPlan, ModelTemplate};
use qvar::mcmc::{Block, ConstPrior, FixedBlocks, GarchInit, McmcConfig, Priors, Regime, SvPrior};
use qvar::simstudy::{DgpConfig, StudyConfig};
use serde::Deserialize;

pub const ENV_PREFIX: &str = "QVAR_";

/// A configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub mcmc: McmcSection,
    pub priors: PriorSection,
    pub backtest: BacktestSection,
    pub evaluate: EvaluateSection,
    pub simulate: SimulateSection,
    pub study: StudySection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// 0 lets the thread pool pick.
    pub threads: usize,
    pub sequential: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1, threads: 0, sequential: false }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DataTransform {
    #[default]
    None,
    Growth,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub transform: DataTransform,
    /// Standardize the whole panel before estimation.
    pub standardize: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub regimes: Vec<String>,
    /// One level per variable, or a single level used for all of them.
    pub quantiles: Vec<f64>,
    pub lag_order: usize,
    pub intercept: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { regimes: vec!["QVAR-SV".into()], quantiles: vec![0.5], lag_order: 1, intercept: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    pub freeze_adaptation: bool,
    pub sweep_order: Vec<String>,
    pub sv_parallel: bool,
    /// Initial GARCH variances, one per variable; empty means the unconditional variance.
    pub garch_initial_variance: Vec<f64>,
    pub target_h: f64,
    pub target_mh: f64,
}

impl Default for McmcSection {
    fn default() -> Self {
        let d = McmcConfig::default();
        Self {
            burn_in: d.burn_in,
            keep: d.keep,
            thin: d.thin,
            freeze_adaptation: d.freeze_adaptation,
            sweep_order: vec!["beta".into(), "a".into(), "w".into(), "vol".into()],
            sv_parallel: d.sv_parallel,
            garch_initial_variance: Vec::new(),
            target_h: d.target_h,
            target_mh: d.target_mh,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub beta_mean: f64,
    pub beta_var: f64,
    pub a_mean: f64,
    pub a_var: f64,
    pub sv_a_rho: f64,
    pub sv_b_rho: f64,
    pub sv_a_sigma: f64,
    pub sv_b_sigma: f64,
    pub garch_mu_omega: f64,
    pub garch_var_omega: f64,
    pub garch_mu_alpha: f64,
    pub garch_var_alpha: f64,
    pub garch_mu_gamma: f64,
    pub garch_var_gamma: f64,
    pub garch_corr_alpha_gamma: f64,
    pub const_shape: f64,
    pub const_rate: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let p = Priors::default();
        Self {
            beta_mean: p.beta_mean,
            beta_var: p.beta_var,
            a_mean: p.a_mean,
            a_var: p.a_var,
            sv_a_rho: p.sv.a_rho,
            sv_b_rho: p.sv.b_rho,
            sv_a_sigma: p.sv.a_sigma,
            sv_b_sigma: p.sv.b_sigma,
            garch_mu_omega: p.garch.mu_omega,
            garch_var_omega: p.garch.var_omega,
            garch_mu_alpha: p.garch.mu_alpha,
            garch_var_alpha: p.garch.var_alpha,
            garch_mu_gamma: p.garch.mu_gamma,
            garch_var_gamma: p.garch.var_gamma,
            garch_corr_alpha_gamma: p.garch.corr_alpha_gamma,
            const_shape: p.constant.shape,
            const_rate: p.constant.rate,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    pub window_length: usize,
    pub horizons: Vec<usize>,
    pub step: usize,
    /// Explicit τ-grid; when empty the grid is `grid_count` equally spaced levels.
    pub quantile_grid: Vec<f64>,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_count: usize,
    pub models: Vec<String>,
    pub n_paths: usize,
    pub rearrange: bool,
}

impl Default for BacktestSection {
    fn default() -> Self {
        let d = BacktestPlan::default();
        Self {
            window_length: d.window_length,
            horizons: d.horizons,
            step: d.step,
            quantile_grid: Vec::new(),
            grid_lo: 0.1,
            grid_hi: 0.9,
            grid_count: 17,
            models: d.models.iter().map(|m| m.model_id().to_string()).collect(),
            n_paths: d.n_paths,
            rearrange: d.rearrange,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Forecast records; defaults to `forecasts.csv` in the output directory.
    pub records: Option<PathBuf>,
    /// Realized values; defaults to the data path.
    pub realized: Option<PathBuf>,
    pub benchmark: String,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { records: None, realized: None, benchmark: Regime::Const.model_id().into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub len: usize,
    pub burn: usize,
    pub phi_h: f64,
    pub sigma2_h: f64,
    pub mean_h: f64,
    pub dof: f64,
    pub skew: f64,
    pub correlation: f64,
    pub innovation_scale: f64,
    pub diag_lo: f64,
    pub diag_hi: f64,
    pub offdiag_sd: f64,
    pub max_radius: f64,
    pub max_retries: usize,
    pub start_date: NaiveDate,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let d = DgpConfig::default();
        Self {
            n: d.n,
            len: d.len,
            burn: d.burn,
            phi_h: d.phi_h,
            sigma2_h: d.sigma2_h,
            mean_h: d.mean_h,
            dof: d.dof,
            skew: d.skew,
            correlation: d.correlation,
            innovation_scale: d.innovation_scale,
            diag_lo: d.diag_range.0,
            diag_hi: d.diag_range.1,
            offdiag_sd: d.offdiag_sd,
            max_radius: d.max_radius,
            max_retries: d.max_retries,
            start_date: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub replications: usize,
    pub quantile_grid: Vec<f64>,
    /// The first model is the benchmark.
    pub models: Vec<String>,
}

impl Default for StudySection {
    fn default() -> Self {
        let d = StudyConfig::default();
        Self {
            replications: d.replications,
            quantile_grid: d.quantile_grid,
            models: d.models.iter().map(|m| m.model_id().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodEntry {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Sub-periods for the descriptive statistics; empty means the full sample.
    pub periods: Vec<PeriodEntry>,
    /// Also run the simulation study.
    pub study: bool,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses `text` (read from `origin`) and applies the given environment overrides.
pub fn parse(text: &str, origin: &str, env: &[(String, String)]) -> Result<Config> {
    let mut table: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            return Err(bad(format!("{origin}:{line}: {}", e.message())));
        }
    };
    // Type errors are reported against the file before any override is applied.
    if let Err(e) = toml::from_str::<Config>(text) {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
        return Err(bad(format!("{origin}:{line}: {}", e.message())));
    }
    for (name, raw) in env {
        apply_override(&mut table, name, raw)?;
    }
    Config::deserialize(table).map_err(|e| bad(format!("environment override: {}", e.message())))
}

pub fn load(path: Option<&Path>) -> Result<Config> {
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| bad(format!("{}: {e}", p.display())))?;
            parse(&text, &p.display().to_string(), &env)
        }
        None => parse("", "<defaults>", &env),
    }
}

const SECTIONS: [&str; 10] =
    ["run", "data", "model", "mcmc", "priors", "backtest", "evaluate", "simulate", "study", "report"];

fn apply_override(table: &mut toml::Table, name: &str, raw: &str) -> Result<()> {
    let rest = name[ENV_PREFIX.len()..].to_ascii_lowercase();
    let (section, key) = rest
        .split_once('_')
        .filter(|(s, k)| SECTIONS.contains(s) && !k.is_empty())
        .ok_or_else(|| bad(format!("{name}: expected {ENV_PREFIX}<SECTION>_<KEY> with a known section")))?;
    // Values are TOML literals; anything that does not parse is taken as a string.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(bad(format!("{name}: [{section}] is not a table"))),
    }
}

pub fn regime(id: &str, key: &str) -> Result<Regime> {
    Regime::from_model_id(id).ok_or_else(|| bad(format!("{key}: unknown model '{id}' (use QVAR, QVAR-SV or QVAR-GARCH)")))
}

impl Config {
    pub fn priors(&self) -> Priors {
        let p = &self.priors;
        Priors {
            beta_mean: p.beta_mean,
            beta_var: p.beta_var,
            a_mean: p.a_mean,
            a_var: p.a_var,
            sv: SvPrior { a_rho: p.sv_a_rho, b_rho: p.sv_b_rho, a_sigma: p.sv_a_sigma, b_sigma: p.sv_b_sigma },
            garch: GarchPrior {
                mu_omega: p.garch_mu_omega,
                var_omega: p.garch_var_omega,
                mu_alpha: p.garch_mu_alpha,
                var_alpha: p.garch_var_alpha,
                mu_gamma: p.garch_mu_gamma,
                var_gamma: p.garch_var_gamma,
                corr_alpha_gamma: p.garch_corr_alpha_gamma,
            },
            constant: ConstPrior { shape: p.const_shape, rate: p.const_rate },
        }
    }

    pub fn mcmc(&self) -> Result<McmcConfig> {
        let m = &self.mcmc;
        let sweep_order = m
            .sweep_order
            .iter()
            .map(|b| match b.to_ascii_lowercase().as_str() {
                "beta" => Ok(Block::Beta),
                "a" => Ok(Block::A),
                "w" => Ok(Block::W),
                "vol" => Ok(Block::Vol),
                other => Err(bad(format!("mcmc.sweep_order: unknown block '{other}' (use beta, a, w, vol)"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = McmcConfig {
            burn_in: m.burn_in,
            keep: m.keep,
            thin: m.thin,
            freeze_adaptation: m.freeze_adaptation,
            sweep_order,
            sv_parallel: m.sv_parallel,
            garch_init: if m.garch_initial_variance.is_empty() {
                GarchInit::Unconditional
            } else {
                GarchInit::Fixed(m.garch_initial_variance.clone())
            },
            target_h: m.target_h,
            target_mh: m.target_mh,
            fixed: FixedBlocks::default(),
        };
        cfg.validate().map_err(|e| bad(format!("[mcmc]: {e}")))?;
        Ok(cfg)
    }

    pub fn template(&self, regime: Regime) -> Result<ModelTemplate> {
        let priors = self.priors();
        priors.validate().map_err(|e| bad(format!("[priors]: {e}")))?;
        Ok(ModelTemplate {
            regime,
            lag_order: self.model.lag_order,
            intercept: self.model.intercept,
            priors,
            mcmc: self.mcmc()?,
        })
    }

    fn templates(&self, ids: &[String], key: &str) -> Result<Vec<ModelTemplate>> {
        if ids.is_empty() {
            return Err(bad(format!("{key}: at least one model is required")));
        }
        ids.iter().map(|id| self.template(regime(id, key)?)).collect()
    }

    /// Quantile levels for an n-variable estimation run.
    pub fn levels(&self, n: usize) -> Result<QuantileLevels> {
        let q = &self.model.quantiles;
        let taus = match q.len() {
            1 => vec![q[0]; n],
            len if len == n => q.clone(),
            len => return Err(bad(format!("model.quantiles: {len} levels for {n} variables"))),
        };
        QuantileLevels::new(taus).map_err(|e| bad(format!("model.quantiles: {e}")))
    }

    pub fn estimate_regimes(&self) -> Result<Vec<Regime>> {
        if self.model.regimes.is_empty() {
            return Err(bad("model.regimes: at least one regime is required"));
        }
        self.model.regimes.iter().map(|id| regime(id, "model.regimes")).collect()
    }

    pub fn plan(&self) -> Result<BacktestPlan> {
        let b = &self.backtest;
        let quantile_grid = if b.quantile_grid.is_empty() {
            if b.grid_count == 0 {
                return Err(bad("backtest.grid_count: must be positive"));
            }
            QuantileLevels::grid(b.grid_lo, b.grid_hi, b.grid_count)
        } else {
            b.quantile_grid.clone()
        };
        let plan = BacktestPlan {
            window_length: b.window_length,
            horizons: b.horizons.clone(),
            step: b.step,
            quantile_grid,
            models: self.templates(&b.models, "backtest.models")?,
            n_paths: b.n_paths,
            rearrange: b.rearrange,
        };
        plan.validate().map_err(|e| bad(format!("[backtest]: {e}")))?;
        Ok(plan)
    }

    pub fn dgp(&self) -> DgpConfig {
        let s = &self.simulate;
        DgpConfig {
            n: s.n,
            len: s.len,
            burn: s.burn,
            phi_h: s.phi_h,
            sigma2_h: s.sigma2_h,
            mean_h: s.mean_h,
            dof: s.dof,
            skew: s.skew,
            correlation: s.correlation,
            innovation_scale: s.innovation_scale,
            diag_range: (s.diag_lo, s.diag_hi),
            offdiag_sd: s.offdiag_sd,
            max_radius: s.max_radius,
            max_retries: s.max_retries,
            initial: None,
        }
    }

    pub fn study(&self) -> Result<StudyConfig> {
        Ok(StudyConfig {
            dgp: self.dgp(),
            quantile_grid: self.study.quantile_grid.clone(),
            replications: self.study.replications,
            models: self.templates(&self.study.models, "study.models")?,
        })
    }

    pub fn periods(&self) -> Vec<SubPeriod> {
        self.report
            .periods
            .iter()
            .map(|p| SubPeriod { label: p.label.clone(), start: p.start, end: p.end })
            .collect()
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.path.as_deref().ok_or_else(|| bad("data.path: required for this command"))
    }
}

//! Quantile forecasts from posterior draws and the rolling-window backtest.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use log::{info, warn};

use crate::data::{standardize, TimeSeriesPanel};
use crate::distributions::{mal_sample, std_normal};
use crate::domain::{build_var_design, location, regressors_from_history, theta_params, QuantileLevels};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_from_seed, Execution, Rng};
use crate::mcmc::{initialize, run_chain_from, McmcConfig, ModelSpec, PosteriorDraws, Priors, Regime, TerminalVol};

/// Simulated values beyond this magnitude (in model units) mark a path as explosive.
pub const EXPLOSION_BOUND: f64 = 1e6;

/// One-step-ahead quantile forecast: the posterior mean of the location x'β.
pub fn forecast_one_step(draws: &PosteriorDraws, x_next: &[f64]) -> Result<Vec<f64>> {
    if x_next.len() != draws.k {
        return Err(Error::Dimension(format!("regressor vector has {} entries, expected {}", x_next.len(), draws.k)));
    }
    if draws.draws.is_empty() {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    let m = draws.draws.len() as f64;
    let mut q = vec![0.0; draws.n];
    for d in &draws.draws {
        for (qj, l) in q.iter_mut().zip(location(&d.beta, x_next, draws.n)) {
            *qj += l / m;
        }
    }
    Ok(q)
}

/// Result of an iterated multi-step forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStep {
    pub q_hat: Vec<f64>,
    /// Paths dropped because they left the `EXPLOSION_BOUND` box.
    pub trimmed: usize,
}

struct PathVol {
    var: Vec<f64>,
}

impl PathVol {
    fn start(vol: &TerminalVol, rng: &mut Rng) -> Self {
        let var = match vol {
            TerminalVol::Const { delta2 } => delta2.clone(),
            TerminalVol::Sv { h_last, phi, sigma2_h } => (0..h_last.len())
                .map(|j| (phi[j] * h_last[j] + sigma2_h[j].sqrt() * std_normal(rng)).exp())
                .collect(),
            TerminalVol::Garch { sigma2_next, .. } => sigma2_next.clone(),
        };
        Self { var }
    }

    /// Moves the variances one period ahead given the simulated deviation from the location.
    fn advance(&mut self, vol: &TerminalVol, dev: &[f64], w: f64, theta1: &[f64], rng: &mut Rng) {
        match vol {
            TerminalVol::Const { .. } => {}
            TerminalVol::Sv { phi, sigma2_h, .. } => {
                for j in 0..self.var.len() {
                    let h = phi[j] * self.var[j].ln() + sigma2_h[j].sqrt() * std_normal(rng);
                    self.var[j] = h.exp();
                }
            }
            TerminalVol::Garch { statics, .. } => {
                for j in 0..self.var.len() {
                    let s = &statics[j];
                    let e = dev[j] - w * theta1[j] * self.var[j].sqrt();
                    self.var[j] = s.omega + s.alpha * e * e + s.gamma * self.var[j];
                }
            }
        }
    }
}

/// Iterated h-step forecast: intermediate observations are simulated from the fitted
/// law with fresh mixing variables and propagated volatility, and the location at
/// t+h is averaged over draws and paths. `history` holds the in-sample rows, most
/// recent last.
#[allow(clippy::too_many_arguments)]
pub fn forecast_multi_step(
    draws: &PosteriorDraws,
    history: &[Vec<f64>],
    lag_order: usize,
    intercept: bool,
    horizon: usize,
    n_paths: usize,
    rng: &mut Rng,
) -> Result<MultiStep> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let x_now = regressors_from_history(history, lag_order, intercept)?;
    if horizon == 1 || lag_order == 0 {
        return Ok(MultiStep { q_hat: forecast_one_step(draws, &x_now)?, trimmed: 0 });
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("need at least one simulated path".into()));
    }
    if x_now.len() != draws.k {
        return Err(Error::Dimension(format!("regressor vector has {} entries, expected {}", x_now.len(), draws.k)));
    }
    let n = draws.n;
    let levels = QuantileLevels::new(draws.levels.clone())?;
    let theta = theta_params(&levels);
    let tail_len = lag_order.min(history.len());
    let mut sum = vec![0.0; n];
    let mut kept = 0usize;
    let mut trimmed = 0usize;
    for d in &draws.draws {
        for _ in 0..n_paths {
            let mut recent: Vec<Vec<f64>> = history[history.len() - tail_len..].to_vec();
            let mut vol = PathVol::start(&d.vol, rng);
            let mut ok = true;
            for _ in 1..horizon {
                let x = regressors_from_history(&recent, lag_order, intercept)?;
                let loc = location(&d.beta, &x, n);
                let w = crate::distributions::std_exp(rng);
                let y = crate::distributions::mal_sample_given_w(&loc, &theta, &d.a, &vol.var, w, rng)?;
                if y.iter().any(|v| !v.is_finite() || v.abs() > EXPLOSION_BOUND) {
                    ok = false;
                    break;
                }
                let dev: Vec<f64> = y.iter().zip(&loc).map(|(a, b)| a - b).collect();
                vol.advance(&d.vol, &dev, w, &theta.theta1, rng);
                recent.remove(0);
                recent.push(y);
            }
            if !ok {
                trimmed += 1;
                continue;
            }
            let x = regressors_from_history(&recent, lag_order, intercept)?;
            for (s, l) in sum.iter_mut().zip(location(&d.beta, &x, n)) {
                *s += l;
            }
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::Divergence { iteration: horizon, block: "forecast paths".into() });
    }
    if trimmed > 0 {
        warn!("{trimmed} explosive forecast paths trimmed at horizon {horizon}");
    }
    Ok(MultiStep { q_hat: sum.into_iter().map(|s| s / kept as f64).collect(), trimmed })
}

/// Everything that defines a model apart from its quantile levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTemplate {
    pub regime: Regime,
    pub lag_order: usize,
    pub intercept: bool,
    pub priors: Priors,
    pub mcmc: McmcConfig,
}

impl ModelTemplate {
    pub fn new(regime: Regime) -> Self {
        let s = ModelSpec::new(regime, QuantileLevels::uniform(0.5, 1).expect("valid level"));
        Self { regime, lag_order: s.lag_order, intercept: s.intercept, priors: s.priors, mcmc: s.mcmc }
    }

    pub fn model_id(&self) -> &'static str {
        self.regime.model_id()
    }

    pub fn spec(&self, levels: QuantileLevels) -> ModelSpec {
        ModelSpec {
            regime: self.regime,
            levels,
            lag_order: self.lag_order,
            intercept: self.intercept,
            priors: self.priors.clone(),
            mcmc: self.mcmc.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestPlan {
    pub window_length: usize,
    pub horizons: Vec<usize>,
    pub step: usize,
    /// Each level is applied to every variable.
    pub quantile_grid: Vec<f64>,
    pub models: Vec<ModelTemplate>,
    pub n_paths: usize,
    /// Sort forecasts across the τ-grid before output.
    pub rearrange: bool,
}

impl Default for BacktestPlan {
    fn default() -> Self {
        Self {
            window_length: 261,
            horizons: vec![1, 5],
            step: 1,
            quantile_grid: QuantileLevels::grid(0.1, 0.9, 17),
            models: vec![
                ModelTemplate::new(Regime::Const),
                ModelTemplate::new(Regime::Sv),
                ModelTemplate::new(Regime::Garch),
            ],
            n_paths: 100,
            rearrange: false,
        }
    }
}

impl BacktestPlan {
    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidParameter("horizons must be non-empty and at least 1".into()));
        }
        if self.step == 0 {
            return Err(Error::InvalidParameter("origin step must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidParameter("no models in the backtest plan".into()));
        }
        if self.quantile_grid.is_empty() {
            return Err(Error::InvalidParameter("empty quantile grid".into()));
        }
        QuantileLevels::new(self.quantile_grid.clone())?;
        for m in &self.models {
            if self.window_length < m.lag_order + 10 {
                return Err(Error::InvalidParameter(format!(
                    "window length {} is shorter than lag order {} + 10",
                    self.window_length, m.lag_order
                )));
            }
        }
        Ok(())
    }

    /// Row indices of the forecast origins (last in-sample row of each window).
    pub fn origins(&self, panel_len: usize) -> Vec<usize> {
        let first = self.window_length.saturating_sub(1);
        let h = self.max_horizon();
        if panel_len < self.window_length + h {
            return Vec::new();
        }
        (first..panel_len - h).step_by(self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub origin: NaiveDate,
    pub horizon: usize,
    pub tau: f64,
    pub variable: String,
    pub model_id: String,
    pub q_hat_std: f64,
    pub q_hat_raw: f64,
}

/// A model fit that failed at some origin; the whole origin is skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginFailure {
    pub origin: NaiveDate,
    pub model_id: String,
    pub tau: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BacktestOutput {
    pub records: Vec<ForecastRecord>,
    pub failures: Vec<OriginFailure>,
    /// Pairs of adjacent τ levels whose forecasts crossed, summed over cells.
    pub crossings: usize,
}

/// Records produced for one origin, in output order.
#[derive(Debug, Clone, PartialEq)]
pub enum OriginResult {
    Done(Vec<ForecastRecord>),
    Failed(OriginFailure),
}

fn forecast_origin(
    panel: &TimeSeriesPanel,
    plan: &BacktestPlan,
    origin: usize,
    seed: u64,
) -> Result<OriginResult> {
    let window = panel.slice(origin + 1 - plan.window_length..origin + 1);
    let (std_panel, scaling) = standardize(&window)?;
    let n = panel.n_vars();
    let date = panel.dates[origin];
    let mut out = Vec::new();
    for (mi, template) in plan.models.iter().enumerate() {
        let design = build_var_design(&std_panel, template.lag_order, template.intercept)?;
        for (ti, &tau) in plan.quantile_grid.iter().enumerate() {
            let spec = template.spec(QuantileLevels::uniform(tau, n)?);
            let fit_seed = derive_seed(seed, &[origin as u64, mi as u64, ti as u64]);
            let fitted = initialize(&spec, &design)
                .and_then(|init| run_chain_from(&spec, &design, init, fit_seed, Execution::Sequential));
            let draws = match fitted {
                Ok(d) => d,
                Err(e) if e.is_numerical() => {
                    return Ok(OriginResult::Failed(OriginFailure {
                        origin: date,
                        model_id: template.model_id().to_string(),
                        tau,
                        message: e.to_string(),
                    }))
                }
                Err(e) => return Err(e),
            };
            let mut rng = rng_from_seed(derive_seed(fit_seed, &[u64::MAX]));
            for &h in &plan.horizons {
                let q = forecast_multi_step(
                    &draws,
                    &std_panel.values,
                    template.lag_order,
                    template.intercept,
                    h,
                    plan.n_paths,
                    &mut rng,
                );
                let q = match q {
                    Ok(q) => q.q_hat,
                    Err(e) if e.is_numerical() => {
                        return Ok(OriginResult::Failed(OriginFailure {
                            origin: date,
                            model_id: template.model_id().to_string(),
                            tau,
                            message: e.to_string(),
                        }))
                    }
                    Err(e) => return Err(e),
                };
                for j in 0..n {
                    out.push(ForecastRecord {
                        origin: date,
                        horizon: h,
                        tau,
                        variable: panel.names[j].clone(),
                        model_id: template.model_id().to_string(),
                        q_hat_std: q[j],
                        q_hat_raw: scaling.invert(j, q[j]),
                    });
                }
            }
        }
    }
    Ok(OriginResult::Done(out))
}

/// Counts adjacent crossings across the τ-grid and, if requested, sorts each
/// (origin, horizon, variable, model) cell so forecasts are non-decreasing in τ.
pub fn rearrange_quantiles(records: &mut [ForecastRecord], apply: bool) -> usize {
    let mut cells: BTreeMap<(NaiveDate, usize, String, String), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        cells.entry((r.origin, r.horizon, r.variable.clone(), r.model_id.clone())).or_default().push(i);
    }
    let mut crossings = 0;
    for idx in cells.values() {
        let mut idx = idx.clone();
        idx.sort_by(|&a, &b| records[a].tau.total_cmp(&records[b].tau));
        crossings += idx.windows(2).filter(|p| records[p[1]].q_hat_std < records[p[0]].q_hat_std).count();
        if apply {
            let mut std: Vec<f64> = idx.iter().map(|&i| records[i].q_hat_std).collect();
            let mut raw: Vec<f64> = idx.iter().map(|&i| records[i].q_hat_raw).collect();
            std.sort_by(f64::total_cmp);
            raw.sort_by(f64::total_cmp);
            for (p, &i) in idx.iter().enumerate() {
                records[i].q_hat_std = std[p];
                records[i].q_hat_raw = raw[p];
            }
        }
    }
    crossings
}

/// Rolling-window backtest. Each origin is fitted independently with seeds derived
/// from `seed` and the origin's row, so any subset of origins reproduces the records
/// of a full run. `skip` lists origin rows already completed (resume), and
/// `on_origin` is called once per finished origin in chronological order.
pub fn run_backtest<F>(
    panel: &TimeSeriesPanel,
    plan: &BacktestPlan,
    seed: u64,
    exec: Execution,
    skip: &[NaiveDate],
    mut on_origin: F,
) -> Result<BacktestOutput>
where
    F: FnMut(NaiveDate, &OriginResult) -> Result<()>,
{
    plan.validate()?;
    let origins: Vec<usize> =
        plan.origins(panel.len()).into_iter().filter(|&o| !skip.contains(&panel.dates[o])).collect();
    if plan.origins(panel.len()).is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} rows cannot hold a window of {} plus horizon {}",
            panel.len(),
            plan.window_length,
            plan.max_horizon()
        )));
    }
    let batch = if exec.is_parallel() { worker_count() } else { 1 };
    let mut output = BacktestOutput::default();
    for chunk in origins.chunks(batch) {
        let results = exec.map(chunk.to_vec(), |o| forecast_origin(panel, plan, o, seed));
        for (o, res) in chunk.iter().zip(results) {
            let res = res?;
            on_origin(panel.dates[*o], &res)?;
            match res {
                OriginResult::Done(recs) => output.records.extend(recs),
                OriginResult::Failed(f) => {
                    warn!("origin {} skipped: {} at tau {} failed: {}", f.origin, f.model_id, f.tau, f.message);
                    output.failures.push(f);
                }
            }
        }
    }
    output.crossings = rearrange_quantiles(&mut output.records, plan.rearrange);
    if output.crossings > 0 {
        info!("{} quantile crossings across the tau grid", output.crossings);
    }
    Ok(output)
}

#[cfg(feature = "parallel")]
fn worker_count() -> usize {
    rayon::current_num_threads().max(1)
}

#[cfg(not(feature = "parallel"))]
fn worker_count() -> usize {
    1
}

const HEADER: [&str; 7] = ["origin_date", "horizon", "tau", "variable", "model_id", "q_hat_std", "q_hat_raw"];

pub fn write_records_csv<W: Write>(records: &[ForecastRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.origin.format("%Y-%m-%d").to_string(),
            r.horizon.to_string(),
            r.tau.to_string(),
            r.variable.clone(),
            r.model_id.clone(),
            r.q_hat_std.to_string(),
            r.q_hat_raw.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<ForecastRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(Error::Data { line: 1, message: format!("expected header {}", HEADER.join(",")) });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let bad = |what: &str| Error::Data { line, message: format!("cannot parse {what}") };
        let num = |c: usize, what: &str| rec[c].trim().parse::<f64>().map_err(|_| bad(what));
        out.push(ForecastRecord {
            origin: NaiveDate::parse_from_str(rec[0].trim(), "%Y-%m-%d").map_err(|_| bad("origin_date"))?,
            horizon: rec[1].trim().parse().map_err(|_| bad("horizon"))?,
            tau: num(2, "tau")?,
            variable: rec[3].to_string(),
            model_id: rec[4].to_string(),
            q_hat_std: num(5, "q_hat_std")?,
            q_hat_raw: num(6, "q_hat_raw")?,
        });
    }
    Ok(out)
}

/// One draw from the fitted one-step predictive law, mostly useful for calibration checks.
pub fn predictive_sample(draws: &PosteriorDraws, x_next: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    use rand::Rng as _;
    if draws.draws.is_empty() {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    let d = &draws.draws[rng.random_range(0..draws.draws.len())];
    let levels = QuantileLevels::new(draws.levels.clone())?;
    let theta = theta_params(&levels);
    let vol = PathVol::start(&d.vol, rng);
    mal_sample(&location(&d.beta, x_next, draws.n), &theta, &d.a, &vol.var, rng)
}

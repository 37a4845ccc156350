//! Monte Carlo study: VAR(1) with stochastic volatility and skew-t innovations,
//! fitted by each model across a quantile grid.

use std::io::Write;

use log::warn;
use nalgebra::DMatrix;
use rand::Rng as _;

use crate::data::TimeSeriesPanel;
use crate::distributions::{skewt_sample, std_normal, SkewTParams};
use crate::domain::{build_var_design, QuantileLevels, RegressionDesign};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_from_seed, Execution};
use crate::forecast::ModelTemplate;
use crate::mcmc::{initialize, quantile_sorted, run_chain_from, Regime};

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub n: usize,
    pub len: usize,
    /// Discarded start-up periods.
    pub burn: usize,
    pub phi_h: f64,
    pub sigma2_h: f64,
    pub mean_h: f64,
    pub dof: f64,
    pub skew: f64,
    /// Common off-diagonal correlation of the innovations.
    pub correlation: f64,
    /// Multiplies every innovation; zero gives the deterministic path.
    pub innovation_scale: f64,
    /// Diagonal entries of B are drawn from this interval.
    pub diag_range: (f64, f64),
    pub offdiag_sd: f64,
    pub max_radius: f64,
    pub max_retries: usize,
    pub initial: Option<Vec<f64>>,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 4,
            len: 200,
            burn: 100,
            phi_h: 0.95,
            sigma2_h: 0.05,
            mean_h: 0.0,
            dof: 5.0,
            skew: 1.0,
            correlation: 0.3,
            innovation_scale: 1.0,
            diag_range: (0.2, 0.6),
            offdiag_sd: 0.1,
            max_radius: 0.9,
            max_retries: 1000,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub panel: TimeSeriesPanel,
    pub b: DMatrix<f64>,
    /// Log-variance paths, T rows of n values.
    pub h: Vec<Vec<f64>>,
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn simulate_dgp(cfg: &DgpConfig, seed: u64) -> Result<SimulatedData> {
    let n = cfg.n;
    if n == 0 || cfg.len < 20 {
        return Err(Error::InvalidParameter(format!("need n ≥ 1 and T ≥ 20, got n={n}, T={}", cfg.len)));
    }
    if !(cfg.phi_h.abs() < 1.0) || cfg.sigma2_h < 0.0 || cfg.innovation_scale < 0.0 {
        return Err(Error::InvalidParameter("invalid volatility settings".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut b = None;
    for _ in 0..cfg.max_retries.max(1) {
        let cand = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                rng.random_range(cfg.diag_range.0..=cfg.diag_range.1)
            } else {
                cfg.offdiag_sd * std_normal(&mut rng)
            }
        });
        if spectral_radius(&cand) < cfg.max_radius {
            b = Some(cand);
            break;
        }
    }
    let b = b.ok_or_else(|| Error::RejectionCap {
        cap: cfg.max_retries,
        context: format!("no B with spectral radius below {}", cfg.max_radius),
    })?;
    let scale = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { cfg.correlation });
    let params = SkewTParams::new(cfg.dof, vec![cfg.skew; n], scale)?;
    let mut y = cfg.initial.clone().unwrap_or_else(|| vec![0.0; n]);
    if y.len() != n {
        return Err(Error::Dimension("initial vector length differs from n".into()));
    }
    let sd_h = cfg.sigma2_h.sqrt();
    let mut h: Vec<f64> =
        (0..n).map(|_| cfg.mean_h + sd_h / (1.0 - cfg.phi_h * cfg.phi_h).sqrt() * std_normal(&mut rng)).collect();
    let mut rows = Vec::with_capacity(cfg.len);
    let mut hs = Vec::with_capacity(cfg.len);
    for t in 0..cfg.burn + cfg.len {
        for hj in h.iter_mut() {
            *hj = cfg.mean_h + cfg.phi_h * (*hj - cfg.mean_h) + sd_h * std_normal(&mut rng);
        }
        let e = skewt_sample(&params, &mut rng);
        y = (0..n)
            .map(|i| {
                (0..n).map(|l| b[(i, l)] * y[l]).sum::<f64>() + cfg.innovation_scale * (h[i] / 2.0).exp() * e[i]
            })
            .collect();
        if t >= cfg.burn {
            rows.push(y.clone());
            hs.push(h.clone());
        }
    }
    let names = (0..n).map(|j| format!("y{}", j + 1)).collect();
    Ok(SimulatedData { panel: TimeSeriesPanel::from_rows(rows, names)?, b, h: hs })
}

/// Slope coefficients of equation j from an equation-major β with `k` regressors.
fn slopes(beta: &[f64], k: usize, j: usize, intercept: bool) -> &[f64] {
    let off = usize::from(intercept);
    &beta[j * k + off..(j + 1) * k]
}

/// Mean over t and equations of |x_t'β̂ − x_t'β| restricted to the slope blocks.
pub fn slope_mad(beta_hat: &[f64], b_true: &DMatrix<f64>, design: &RegressionDesign) -> Result<f64> {
    let (n, k) = (design.n, design.k);
    let p = usize::from(design.intercept);
    if beta_hat.len() != n * k || k - p != n || b_true.nrows() != n || b_true.ncols() != n {
        return Err(Error::Dimension("slope MAD needs a VAR(1) layout".into()));
    }
    let mut total = 0.0;
    for x in &design.x {
        for j in 0..n {
            let s = slopes(beta_hat, k, j, design.intercept);
            let fit: f64 = s.iter().zip(&x[p..]).map(|(a, b)| a * b).sum();
            let truth: f64 = (0..n).map(|l| b_true[(j, l)] * x[p + l]).sum();
            total += (fit - truth).abs();
        }
    }
    Ok(total / (design.len() * n) as f64)
}

/// Median across replications.
pub fn mmad(per_replication: &[f64]) -> Result<f64> {
    if per_replication.is_empty() {
        return Err(Error::InsufficientData("no replications".into()));
    }
    let mut v = per_replication.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, 0.5))
}

/// Euclidean norm of the vectorized coefficient difference.
pub fn frobenius_error(beta_hat: &[f64], beta_true: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::Dimension(format!("{} vs {} coefficients", beta_hat.len(), beta_true.len())));
    }
    Ok(beta_hat.iter().zip(beta_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dgp: DgpConfig,
    pub quantile_grid: Vec<f64>,
    pub replications: usize,
    /// The first model is the benchmark for ratios.
    pub models: Vec<ModelTemplate>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig::default(),
            quantile_grid: vec![0.1, 0.5, 0.9],
            replications: 15,
            models: vec![
                ModelTemplate::new(Regime::Const),
                ModelTemplate::new(Regime::Sv),
                ModelTemplate::new(Regime::Garch),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: usize,
    pub tau: f64,
    pub model_id: String,
    pub mad: f64,
    pub fn_error: f64,
    /// Posterior-mean intercepts, one per equation.
    pub intercepts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub tau: f64,
    pub model_id: String,
    pub mmad: f64,
    pub fn_error: f64,
    pub mmad_ratio: Option<f64>,
    pub fn_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub replications: Vec<ReplicationResult>,
    pub dropped: Vec<(usize, String)>,
}

impl StudyReport {
    /// Per-replication MAD ratio of `model_id` against the benchmark at `tau`.
    pub fn mad_ratios(&self, model_id: &str, tau: f64) -> Vec<f64> {
        let bench = match self.rows.first() {
            Some(r) => r.model_id.clone(),
            None => return Vec::new(),
        };
        let find = |rep: usize, m: &str| {
            self.replications.iter().find(|r| r.replication == rep && r.tau == tau && r.model_id == m).map(|r| r.mad)
        };
        let mut reps: Vec<usize> = self.replications.iter().map(|r| r.replication).collect();
        reps.dedup();
        reps.into_iter()
            .filter_map(|rep| Some(find(rep, model_id)? / find(rep, &bench)?))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tau", "model_id", "mmad", "fn", "mmad_ratio", "fn_ratio"])?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                r.tau.to_string(),
                r.model_id.clone(),
                r.mmad.to_string(),
                r.fn_error.to_string(),
                opt(r.mmad_ratio),
                opt(r.fn_ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_replications_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["replication", "tau", "model_id", "mad", "fn", "intercepts"])?;
        for r in &self.replications {
            let ic: Vec<String> = r.intercepts.iter().map(|v| v.to_string()).collect();
            w.write_record([
                r.replication.to_string(),
                r.tau.to_string(),
                r.model_id.clone(),
                r.mad.to_string(),
                r.fn_error.to_string(),
                ic.join(" "),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fit_one(
    data: &SimulatedData,
    design: &RegressionDesign,
    template: &ModelTemplate,
    tau: f64,
    seed: u64,
) -> Result<(f64, f64, Vec<f64>)> {
    let n = data.panel.n_vars();
    let spec = template.spec(QuantileLevels::uniform(tau, n)?);
    let init = initialize(&spec, design)?;
    let post = run_chain_from(&spec, design, init, seed, Execution::Sequential)?;
    let beta = post.beta_mean();
    let mad = slope_mad(&beta, &data.b, design)?;
    let k = design.k;
    let est: Vec<f64> = (0..n).flat_map(|j| slopes(&beta, k, j, design.intercept).to_vec()).collect();
    let truth: Vec<f64> = (0..n).flat_map(|j| (0..n).map(move |l| (j, l))).map(|(j, l)| data.b[(j, l)]).collect();
    let fn_error = frobenius_error(&est, &truth)?;
    let intercepts = if design.intercept { (0..n).map(|j| beta[j * k]).collect() } else { Vec::new() };
    Ok((mad, fn_error, intercepts))
}

/// Runs every (replication, τ, model) fit. Replications whose data or any fit fail
/// numerically are dropped with a warning.
pub fn run_simulation_study(cfg: &StudyConfig, seed: u64, exec: Execution) -> Result<StudyReport> {
    if cfg.replications < 3 {
        return Err(Error::InvalidParameter("at least three replications are required".into()));
    }
    if cfg.models.is_empty() || cfg.quantile_grid.is_empty() {
        return Err(Error::InvalidParameter("models and quantile grid must be non-empty".into()));
    }
    QuantileLevels::new(cfg.quantile_grid.clone())?;
    let lag_ok = cfg.models.iter().all(|m| m.lag_order == 1);
    if !lag_ok {
        return Err(Error::InvalidParameter("the study design is a VAR(1); set lag order 1".into()));
    }
    let mut datasets = Vec::with_capacity(cfg.replications);
    for rep in 0..cfg.replications {
        let data = simulate_dgp(&cfg.dgp, derive_seed(seed, &[rep as u64, u64::MAX]))?;
        let designs: Vec<RegressionDesign> =
            cfg.models.iter().map(|m| build_var_design(&data.panel, 1, m.intercept)).collect::<Result<_>>()?;
        datasets.push((data, designs));
    }
    let mut tasks = Vec::new();
    for rep in 0..cfg.replications {
        for (ti, &tau) in cfg.quantile_grid.iter().enumerate() {
            for mi in 0..cfg.models.len() {
                tasks.push((rep, ti, tau, mi));
            }
        }
    }
    let results = exec.map(tasks.clone(), |(rep, ti, tau, mi)| {
        let (data, designs) = &datasets[rep];
        fit_one(data, &designs[mi], &cfg.models[mi], tau, derive_seed(seed, &[rep as u64, ti as u64, mi as u64]))
    });
    let mut dropped: Vec<(usize, String)> = Vec::new();
    let mut reps = Vec::new();
    for (&(rep, _, tau, mi), res) in tasks.iter().zip(results) {
        match res {
            Ok((mad, fn_error, intercepts)) => reps.push(ReplicationResult {
                replication: rep,
                tau,
                model_id: cfg.models[mi].model_id().to_string(),
                mad,
                fn_error,
                intercepts,
            }),
            Err(e) if e.is_numerical() => {
                if !dropped.iter().any(|(r, _)| *r == rep) {
                    warn!("replication {rep} dropped: {e}");
                    dropped.push((rep, e.to_string()));
                }
            }
            Err(e) => return Err(e),
        }
    }
    reps.retain(|r| !dropped.iter().any(|(d, _)| *d == r.replication));
    if reps.is_empty() {
        return Err(Error::InsufficientData("every replication failed".into()));
    }
    let mut rows = Vec::new();
    for &tau in &cfg.quantile_grid {
        let mut bench = None;
        for (mi, m) in cfg.models.iter().enumerate() {
            let sel: Vec<&ReplicationResult> =
                reps.iter().filter(|r| r.tau == tau && r.model_id == m.model_id()).collect();
            let mmad_v = mmad(&sel.iter().map(|r| r.mad).collect::<Vec<_>>())?;
            let fn_v = mmad(&sel.iter().map(|r| r.fn_error).collect::<Vec<_>>())?;
            if mi == 0 {
                bench = Some((mmad_v, fn_v));
            }
            let (bm, bf) = bench.expect("benchmark comes first");
            rows.push(StudyRow {
                tau,
                model_id: m.model_id().to_string(),
                mmad: mmad_v,
                fn_error: fn_v,
                mmad_ratio: (mi > 0).then(|| mmad_v / bm),
                fn_ratio: (mi > 0).then(|| fn_v / bf),
            });
        }
    }
    Ok(StudyReport { rows, replications: reps, dropped })
}

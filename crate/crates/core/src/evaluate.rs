//! Quantile scores, Diebold–Mariano tests and score-weighted forecast combinations.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::forecast::ForecastRecord;

/// Scores are floored here before inversion in the weights.
pub const QS_FLOOR: f64 = 1e-12;
pub const COMB_TV: &str = "COMB-TV";
pub const COMB_AVG: &str = "COMB-AVG";

/// Pinball loss (y − q)(τ − 1{y ≤ q}).
pub fn pinball(y: f64, q: f64, tau: f64) -> f64 {
    let hit = if y <= q { 1.0 } else { 0.0 };
    (y - q) * (tau - hit)
}

pub fn quantile_score(y: &[f64], q_hat: &[f64], tau: f64) -> Result<Vec<f64>> {
    if y.len() != q_hat.len() {
        return Err(Error::Dimension(format!("{} outcomes, {} forecasts", y.len(), q_hat.len())));
    }
    if y.iter().chain(q_hat).any(|v| v.is_nan()) || tau.is_nan() {
        return Err(Error::InvalidParameter("NaN in quantile score input".into()));
    }
    Ok(y.iter().zip(q_hat).map(|(&a, &b)| pinball(a, b, tau)).collect())
}

/// Inverse-score weights from per-model score histories over a common window.
pub fn tv_weights(qs_history: &[Vec<f64>]) -> Result<Vec<f64>> {
    if qs_history.is_empty() || qs_history[0].is_empty() {
        return Err(Error::InsufficientData("empty score window".into()));
    }
    let len = qs_history[0].len();
    if qs_history.iter().any(|s| s.len() != len) {
        return Err(Error::Dimension("score histories differ in length".into()));
    }
    let inv: Vec<f64> = qs_history.iter().map(|s| s.iter().map(|q| 1.0 / q.max(QS_FLOOR)).sum()).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.iter().map(|v| v / total).collect())
}

/// Weights for each evaluation period, using only scores of forecasts whose
/// targets were observed by that period's origin. `origin_rows[t]` is the panel row
/// of origin t; periods without any realized history get equal weights.
pub fn tv_weight_path(qs: &[Vec<f64>], origin_rows: &[usize], horizon: usize) -> Result<Vec<Vec<f64>>> {
    let k = qs.len();
    if k == 0 {
        return Err(Error::InsufficientData("no models".into()));
    }
    if qs.iter().any(|s| s.len() != origin_rows.len()) {
        return Err(Error::Dimension("score series and origins differ in length".into()));
    }
    let mut out = Vec::with_capacity(origin_rows.len());
    let mut sums = vec![0.0; k];
    let mut used = 0;
    for &row in origin_rows {
        while used < origin_rows.len() && origin_rows[used] + horizon <= row {
            for (s, series) in sums.iter_mut().zip(qs) {
                *s += 1.0 / series[used].max(QS_FLOOR);
            }
            used += 1;
        }
        if used == 0 {
            out.push(vec![1.0 / k as f64; k]);
        } else {
            let total: f64 = sums.iter().sum();
            out.push(sums.iter().map(|v| v / total).collect());
        }
    }
    Ok(out)
}

/// Temporal average of a weight path.
pub fn avg_weights(tv: &[Vec<f64>]) -> Result<Vec<f64>> {
    if tv.is_empty() {
        return Err(Error::InsufficientData("empty weight path".into()));
    }
    let k = tv[0].len();
    let mut out = vec![0.0; k];
    for w in tv {
        if w.len() != k {
            return Err(Error::Dimension("weight vectors differ in length".into()));
        }
        for (o, v) in out.iter_mut().zip(w) {
            *o += v;
        }
    }
    Ok(out.into_iter().map(|v| v / tv.len() as f64).collect())
}

/// Convex combination of per-model quantile forecasts.
pub fn combine_forecasts(weights: &[f64], forecasts: &[f64]) -> Result<f64> {
    if weights.len() != forecasts.len() {
        return Err(Error::Dimension(format!("{} weights for {} models", weights.len(), forecasts.len())));
    }
    Ok(weights.iter().zip(forecasts).map(|(w, f)| w * f).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmTest {
    pub statistic: f64,
    /// Upper-tail p-value; small values favour the alternative model.
    pub p_value: f64,
}

/// Diebold–Mariano test on d_t = loss_benchmark − loss_alt with a Bartlett HAC
/// variance truncated at lag h−1.
pub fn diebold_mariano(loss_benchmark: &[f64], loss_alt: &[f64], horizon: usize) -> Result<DmTest> {
    if loss_benchmark.len() != loss_alt.len() {
        return Err(Error::Dimension("loss series differ in length".into()));
    }
    let t = loss_benchmark.len();
    if t < 10 {
        return Err(Error::InsufficientData(format!("{t} loss pairs, need at least 10")));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let d: Vec<f64> = loss_benchmark.iter().zip(loss_alt).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / t as f64;
    let autocov = |lag: usize| (lag..t).map(|i| (d[i] - mean) * (d[i - lag] - mean)).sum::<f64>() / t as f64;
    let mut lrv = autocov(0);
    for lag in 1..horizon.min(t) {
        lrv += 2.0 * (1.0 - lag as f64 / horizon as f64) * autocov(lag);
    }
    if !(lrv > 0.0) || !lrv.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    let statistic = mean / (lrv / t as f64).sqrt();
    let normal = Normal::standard();
    Ok(DmTest { statistic, p_value: 1.0 - normal.cdf(statistic) })
}

/// Significance stars: 3 below 1%, 2 below 5%, 1 below 10%.
pub fn stars(p_value: f64) -> u8 {
    if p_value < 0.01 {
        3
    } else if p_value < 0.05 {
        2
    } else if p_value < 0.10 {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub variable: String,
    pub tau: f64,
    pub horizon: usize,
    pub model_id: String,
    pub mean_qs: f64,
    pub ratio: f64,
    pub dm_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: u8,
    pub mcs_member: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub origin: NaiveDate,
    pub variable: String,
    pub tau: f64,
    pub horizon: usize,
    pub model_id: String,
    pub tv_weight: f64,
    pub avg_weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    pub table: Vec<ScoreRow>,
    pub weights: Vec<WeightRow>,
    pub combined: Vec<ForecastRecord>,
    /// Per-period scores keyed like the table rows, in origin order.
    pub scores: BTreeMap<(String, u64, usize, String), Vec<f64>>,
}

impl Evaluation {
    pub fn row(&self, variable: &str, tau: f64, horizon: usize, model_id: &str) -> Option<&ScoreRow> {
        self.table
            .iter()
            .find(|r| r.variable == variable && r.horizon == horizon && r.model_id == model_id && r.tau == tau)
    }

    pub fn period_scores(&self, variable: &str, tau: f64, horizon: usize, model_id: &str) -> Option<&Vec<f64>> {
        self.scores.get(&(variable.to_string(), tau.to_bits(), horizon, model_id.to_string()))
    }
}

struct Cell<'a> {
    /// model -> origin -> record
    by_model: BTreeMap<&'a str, BTreeMap<NaiveDate, &'a ForecastRecord>>,
}

/// Scores every (variable, τ, horizon) cell against realized values, builds the
/// combination weights and combined forecasts (with at least two models) and the
/// ratio table against `benchmark`.
pub fn evaluate_records(records: &[ForecastRecord], realized: &TimeSeriesPanel, benchmark: &str) -> Result<Evaluation> {
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    if !models.contains(benchmark) {
        return Err(Error::MissingModel(format!(
            "{benchmark}: benchmark model set by evaluate.benchmark is not among the records"
        )));
    }
    let mut cells: BTreeMap<(usize, u64, usize), Cell> = BTreeMap::new();
    for r in records {
        let var = realized.names.iter().position(|v| *v == r.variable).ok_or_else(|| {
            Error::Misaligned(format!("variable '{}' (origin {}) is not in the realized panel", r.variable, r.origin))
        })?;
        let row = realized
            .position_of(r.origin)
            .ok_or_else(|| Error::Misaligned(format!("origin {} is not a date of the realized panel", r.origin)))?;
        if row + r.horizon >= realized.len() {
            return Err(Error::Misaligned(format!(
                "origin {} + horizon {} runs past the realized panel end {}",
                r.origin,
                r.horizon,
                realized.dates[realized.len() - 1]
            )));
        }
        let cell = cells
            .entry((var, r.tau.to_bits(), r.horizon))
            .or_insert_with(|| Cell { by_model: BTreeMap::new() });
        cell.by_model.entry(r.model_id.as_str()).or_default().insert(r.origin, r);
    }
    let mut order: Vec<&str> = vec![benchmark];
    order.extend(models.iter().copied().filter(|m| *m != benchmark));
    let mut cell_keys: Vec<_> = cells.keys().copied().collect();
    cell_keys.sort_by(|a, b| a.0.cmp(&b.0).then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1))).then(a.2.cmp(&b.2)));

    let mut out = Evaluation::default();
    for key in cell_keys {
        let (var, tau_bits, h) = key;
        let tau = f64::from_bits(tau_bits);
        let cell = &cells[&key];
        let present: Vec<&str> = order.iter().copied().filter(|m| cell.by_model.contains_key(m)).collect();
        if present.first() != Some(&benchmark) {
            return Err(Error::MissingModel(format!(
                "{benchmark}: benchmark (evaluate.benchmark) has no forecasts for {} tau {tau} h {h}",
                realized.names[var]
            )));
        }
        let mut common: Vec<NaiveDate> = cell.by_model[benchmark].keys().copied().collect();
        for m in &present {
            common.retain(|d| cell.by_model[m].contains_key(d));
        }
        if common.is_empty() {
            return Err(Error::Misaligned(format!(
                "no common origins across models for {} tau {tau} h {h}",
                realized.names[var]
            )));
        }
        let rows: Vec<usize> = common.iter().map(|d| realized.position_of(*d).expect("checked above")).collect();
        let y: Vec<f64> = rows.iter().map(|&r| realized.values[r + h][var]).collect();
        let mut q: Vec<Vec<&ForecastRecord>> = Vec::new();
        let mut qs: Vec<Vec<f64>> = Vec::new();
        for m in &present {
            let recs: Vec<&ForecastRecord> = common.iter().map(|d| cell.by_model[m][d]).collect();
            let qr: Vec<f64> = recs.iter().map(|r| r.q_hat_raw).collect();
            qs.push(quantile_score(&y, &qr, tau)?);
            q.push(recs);
        }
        let mut ids: Vec<String> = present.iter().map(|s| s.to_string()).collect();
        if present.len() >= 2 {
            let tv = tv_weight_path(&qs, &rows, h)?;
            let avg = avg_weights(&tv)?;
            for (t, d) in common.iter().enumerate() {
                for (mi, m) in present.iter().enumerate() {
                    out.weights.push(WeightRow {
                        origin: *d,
                        variable: realized.names[var].clone(),
                        tau,
                        horizon: h,
                        model_id: m.to_string(),
                        tv_weight: tv[t][mi],
                        avg_weight: avg[mi],
                    });
                }
            }
            let mut comb = |name: &str, weights: &dyn Fn(usize) -> Vec<f64>| -> Result<Vec<f64>> {
                let mut raw = Vec::with_capacity(common.len());
                for (t, d) in common.iter().enumerate() {
                    let w = weights(t);
                    let fr: Vec<f64> = q.iter().map(|s| s[t].q_hat_raw).collect();
                    let fs: Vec<f64> = q.iter().map(|s| s[t].q_hat_std).collect();
                    let r = combine_forecasts(&w, &fr)?;
                    raw.push(r);
                    out.combined.push(ForecastRecord {
                        origin: *d,
                        horizon: h,
                        tau,
                        variable: realized.names[var].clone(),
                        model_id: name.to_string(),
                        q_hat_std: combine_forecasts(&w, &fs)?,
                        q_hat_raw: r,
                    });
                }
                Ok(raw)
            };
            let tv_q = comb(COMB_TV, &|t| tv[t].clone())?;
            let avg_q = comb(COMB_AVG, &|_| avg.clone())?;
            qs.push(quantile_score(&y, &tv_q, tau)?);
            qs.push(quantile_score(&y, &avg_q, tau)?);
            ids.push(COMB_TV.into());
            ids.push(COMB_AVG.into());
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let bench_mean = mean(&qs[0]);
        for (mi, id) in ids.iter().enumerate() {
            let m = mean(&qs[mi]);
            let dm = if mi == 0 { None } else { diebold_mariano(&qs[0], &qs[mi], h).ok() };
            out.table.push(ScoreRow {
                variable: realized.names[var].clone(),
                tau,
                horizon: h,
                model_id: id.clone(),
                mean_qs: m,
                ratio: if mi == 0 { 1.0 } else { m / bench_mean },
                dm_stat: dm.map(|d| d.statistic),
                p_value: dm.map(|d| d.p_value),
                stars: dm.map_or(0, |d| stars(d.p_value)),
                mcs_member: None,
            });
            out.scores.insert((realized.names[var].clone(), tau_bits, h, id.clone()), qs[mi].clone());
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_score_table_csv<W: Write>(rows: &[ScoreRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "variable",
        "tau",
        "horizon",
        "model_id",
        "mean_qs",
        "ratio",
        "dm_stat",
        "p_value",
        "stars",
        "stars_rendered",
        "mcs_member",
    ])?;
    for r in rows {
        w.write_record([
            r.variable.clone(),
            r.tau.to_string(),
            r.horizon.to_string(),
            r.model_id.clone(),
            r.mean_qs.to_string(),
            r.ratio.to_string(),
            opt(r.dm_stat),
            opt(r.p_value),
            r.stars.to_string(),
            "*".repeat(r.stars as usize),
            r.mcs_member.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weights_csv<W: Write>(rows: &[WeightRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["origin_date", "variable", "tau", "horizon", "model_id", "tv_weight", "avg_weight"])?;
    for r in rows {
        w.write_record([
            r.origin.format("%Y-%m-%d").to_string(),
            r.variable.clone(),
            r.tau.to_string(),
            r.horizon.to_string(),
            r.model_id.clone(),
            r.tv_weight.to_string(),
            r.avg_weight.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text rendering: benchmark rows show the mean score, the others the ratio
/// with significance stars.
pub fn render_score_table(rows: &[ScoreRow]) -> String {
    let mut out = format!("{:<12} {:>6} {:>3} {:<12} {:>12}\n", "variable", "tau", "h", "model", "QS/ratio");
    for r in rows {
        let value = if r.ratio == 1.0 && r.dm_stat.is_none() {
            format!("{:.3}", r.mean_qs)
        } else {
            format!("{:.3}{}", r.ratio, "*".repeat(r.stars as usize))
        };
        out.push_str(&format!("{:<12} {:>6.3} {:>3} {:<12} {:>12}\n", r.variable, r.tau, r.horizon, r.model_id, value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pinball_examples() {
        assert_eq!(quantile_score(&[1.0], &[0.0], 0.1).unwrap(), vec![0.1]);
        assert!((pinball(0.0, 1.0, 0.1) - 0.9).abs() < 1e-15);
        assert_eq!(pinball(0.7, 0.7, 0.3), 0.0);
        assert!(quantile_score(&[f64::NAN], &[0.0], 0.5).is_err());
        assert!(quantile_score(&[1.0, 2.0], &[0.0], 0.5).is_err());
    }

    #[test]
    fn inverse_score_weights() {
        let w = tv_weights(&[vec![1.0; 4], vec![3.0; 4]]).unwrap();
        assert_eq!(w, vec![0.75, 0.25]);
        let w = tv_weights(&[vec![2.0, 1.0], vec![2.0, 1.0], vec![2.0, 1.0]]).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(tv_weights(&[]).is_err());
        assert!(tv_weights(&[vec![]]).is_err());
    }

    #[test]
    fn hand_built_weight_table() {
        let qs = [vec![1.0, 2.0, 4.0, 0.5], vec![2.0, 2.0, 1.0, 1.0], vec![0.5, 4.0, 2.0, 2.0]];
        // inverse sums: 1+0.5+0.25+2 = 3.75, 0.5+0.5+1+1 = 3, 2+0.25+0.5+0.5 = 3.25; total 10
        let w = tv_weights(&qs).unwrap();
        for (a, b) in w.iter().zip([0.375, 0.3, 0.325]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_use_only_realized_scores() {
        let qs = [vec![1.0, 1.0, 5.0], vec![1.0, 3.0, 5.0]];
        let path = tv_weight_path(&qs, &[10, 11, 12], 1).unwrap();
        assert_eq!(path[0], vec![0.5, 0.5]);
        assert_eq!(path[1], vec![0.5, 0.5]);
        // by origin 12 the first two forecasts are realized: inverse sums 2 and 4/3
        assert!((path[2][0] - 0.6).abs() < 1e-15);
        let path5 = tv_weight_path(&qs, &[10, 11, 12], 2).unwrap();
        assert_eq!(path5[2], vec![0.5, 0.5]);
    }

    #[test]
    fn zero_scores_are_floored() {
        let w = tv_weights(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(w[0] > 0.999_999 && w.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn average_weights() {
        assert_eq!(avg_weights(&[vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap(), vec![0.2, 0.8]);
        assert_eq!(avg_weights(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), vec![0.5, 0.5]);
        assert!(avg_weights(&[]).is_err());
    }

    #[test]
    fn combinations() {
        assert_eq!(combine_forecasts(&[1.0, 0.0, 0.0], &[3.0, 5.0, 7.0]).unwrap(), 3.0);
        assert_eq!(combine_forecasts(&[0.5, 0.5], &[1.0, 3.0]).unwrap(), 2.0);
        assert!(combine_forecasts(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dm_identical_losses_are_degenerate() {
        let l: Vec<f64> = (0..20).map(|i| (i as f64).sin().abs()).collect();
        assert!(matches!(diebold_mariano(&l, &l, 1), Err(Error::DegenerateVariance)));
        assert!(diebold_mariano(&l[..5], &l[..5], 1).is_err());
    }

    #[test]
    fn dm_at_lag_zero_is_plain_t_statistic() {
        let d = [0.3, -0.1, 0.5, 0.2, 0.0, 0.4, -0.3, 0.6, 0.1, 0.2, 0.35, -0.05];
        let alt = vec![0.0; 12];
        let r = diebold_mariano(&d, &alt, 1).unwrap();
        let t = d.len() as f64;
        let mean = d.iter().sum::<f64>() / t;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t;
        let expect = mean / (var / t).sqrt();
        assert!((r.statistic - expect).abs() < 1e-12);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(stars(0.005), 3);
        assert_eq!(stars(0.02), 2);
        assert_eq!(stars(0.07), 1);
        assert_eq!(stars(0.5), 0);
    }

    proptest! {
        #[test]
        fn scores_nonnegative(y in -10.0f64..10.0, q in -10.0f64..10.0, tau in 0.01f64..0.99) {
            let s = pinball(y, q, tau);
            prop_assert!(s >= 0.0);
            prop_assert_eq!(s == 0.0, y == q);
        }

        #[test]
        fn weights_on_simplex(qs in proptest::collection::vec(proptest::collection::vec(0.0f64..5.0, 6), 1..5)) {
            let rows: Vec<usize> = (0..6).collect();
            for w in tv_weight_path(&qs, &rows, 1).unwrap() {
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(w.iter().all(|v| *v >= 0.0));
            }
        }

        #[test]
        fn dm_antisymmetric(a in proptest::collection::vec(0.0f64..3.0, 12..40), shift in 0.01f64..1.0, h in 1usize..4) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift * ((i * 7 % 5) as f64 - 2.0)).collect();
            if let (Ok(x), Ok(y)) = (diebold_mariano(&a, &b, h), diebold_mariano(&b, &a, h)) {
                prop_assert_eq!(x.statistic, -y.statistic);
            }
        }
    }
}

//! CSV ingestion, growth-rate transformation, standardization and summary statistics.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// A transform applied to a panel, kept so it can be inverted or reported.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    /// 100·(x_t − x_{t−1})/x_{t−1}
    GrowthRates,
    Standardized(Standardization),
}

/// Column means and sample standard deviations (divisor T−1).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, j: usize, x: f64) -> f64 {
        (x - self.means[j]) / self.sds[j]
    }

    pub fn invert(&self, j: usize, z: f64) -> f64 {
        self.means[j] + self.sds[j] * z
    }
}

/// Dated n-variate observations, rows ordered by strictly increasing date.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    pub dates: Vec<NaiveDate>,
    /// T rows of n values.
    pub values: Vec<Vec<f64>>,
    pub names: Vec<String>,
    pub transform_log: Vec<Transform>,
}

impl TimeSeriesPanel {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} dates for {} rows",
                dates.len(),
                values.len()
            )));
        }
        let n = names.len();
        for (r, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("row {r} has {} values, expected {n}", row.len())));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: r, column: c });
            }
        }
        for r in 1..dates.len() {
            if dates[r] <= dates[r - 1] {
                return Err(Error::Data {
                    line: r,
                    message: format!("dates not strictly increasing ({} after {})", dates[r], dates[r - 1]),
                });
            }
        }
        Ok(Self { dates, values, names, transform_log: Vec::new() })
    }

    /// Panel with synthetic consecutive daily dates starting 2000-01-01.
    pub fn from_rows(values: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..values.len())
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        Self::new(dates, values, names)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    /// Rows `range` as a new panel (transform log is copied).
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
            names: self.names.clone(),
            transform_log: self.transform_log.clone(),
        }
    }

    pub fn position_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in self.dates.iter().zip(&self.values) {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a panel: header row, first column `date` (ISO-8601), remaining numeric.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeriesPanel> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<TimeSeriesPanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || !headers[0].eq_ignore_ascii_case("date") {
        return Err(Error::Data { line: 1, message: "first column must be `date`".into() });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Data { line: 1, message: "no value columns".into() });
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data { line, message: e.to_string() })?;
        if rec.len() != names.len() + 1 {
            return Err(Error::Data {
                line,
                message: format!("expected {} fields, found {}", names.len() + 1, rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| Error::Data { line, message: format!("bad date '{}': {e}", &rec[0]) })?;
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(Error::Data { line, message: format!("duplicate date {date}") });
            }
            if date < prev {
                return Err(Error::Data {
                    line,
                    message: format!("dates not increasing: {date} follows {prev}"),
                });
            }
        }
        let mut row = Vec::with_capacity(names.len());
        for (c, field) in rec.iter().skip(1).enumerate() {
            if field.is_empty() {
                return Err(Error::Data {
                    line,
                    message: format!("missing value in column {} ({})", c + 2, names[c]),
                });
            }
            let v: f64 = field.parse().map_err(|_| Error::Data {
                line,
                message: format!("cannot parse '{field}' in column {} ({})", c + 2, names[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    line,
                    message: format!("non-finite value in column {} ({})", c + 2, names[c]),
                });
            }
            row.push(v);
        }
        dates.push(date);
        values.push(row);
    }
    TimeSeriesPanel::new(dates, values, names)
}

/// Percentage changes; the result has one row fewer and is dated at the later row.
pub fn growth_rates(panel: &TimeSeriesPanel) -> Result<TimeSeriesPanel> {
    if panel.len() < 2 {
        return Err(Error::InsufficientData("growth rates need at least two rows".into()));
    }
    for (r, row) in panel.values.iter().enumerate() {
        if let Some(c) = row.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "non-positive price at row {r}, column {c}"
            )));
        }
    }
    let values = panel
        .values
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(x, x0)| 100.0 * (x - x0) / x0).collect())
        .collect();
    let mut out = TimeSeriesPanel {
        dates: panel.dates[1..].to_vec(),
        values,
        names: panel.names.clone(),
        transform_log: panel.transform_log.clone(),
    };
    out.transform_log.push(Transform::GrowthRates);
    Ok(out)
}

/// Column-wise mean 0 and sample standard deviation 1.
pub fn standardize(panel: &TimeSeriesPanel) -> Result<(TimeSeriesPanel, Standardization)> {
    let t = panel.len();
    if t < 2 {
        return Err(Error::InsufficientData("standardization needs at least two rows".into()));
    }
    let n = panel.n_vars();
    let mut means = vec![0.0; n];
    let mut sds = vec![0.0; n];
    for j in 0..n {
        let col = panel.column(j);
        let m = col.iter().sum::<f64>() / t as f64;
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (t - 1) as f64;
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "column {} ({}) has zero variance",
                j, panel.names[j]
            )));
        }
        means[j] = m;
        sds[j] = v.sqrt();
    }
    let s = Standardization { means, sds };
    let values = panel
        .values
        .iter()
        .map(|row| row.iter().enumerate().map(|(j, &x)| s.apply(j, x)).collect())
        .collect();
    let mut out = TimeSeriesPanel {
        dates: panel.dates.clone(),
        values,
        names: panel.names.clone(),
        transform_log: panel.transform_log.clone(),
    };
    out.transform_log.push(Transform::Standardized(s.clone()));
    Ok((out, s))
}

pub fn destandardize(panel: &TimeSeriesPanel, s: &Standardization) -> TimeSeriesPanel {
    let values = panel
        .values
        .iter()
        .map(|row| row.iter().enumerate().map(|(j, &z)| s.invert(j, z)).collect())
        .collect();
    let mut out = panel.clone();
    out.values = values;
    if matches!(out.transform_log.last(), Some(Transform::Standardized(_))) {
        out.transform_log.pop();
    }
    out
}

/// Variance (divisor T−1), skewness and non-excess kurtosis (moment ratios).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn moments(x: &[f64]) -> Result<Moments> {
    let t = x.len();
    if t < 4 {
        return Err(Error::InsufficientData(format!("{t} points, need at least 4")));
    }
    let tf = t as f64;
    let mean = x.iter().sum::<f64>() / tf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (tf - 1.0);
    let (m2, m3, m4) = (m2 / tf, m3 / tf, m4 / tf);
    Ok(Moments { variance, skewness: m3 / m2.powf(1.5), kurtosis: m4 / (m2 * m2) })
}

/// One labelled sub-period given as an inclusive date range.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPeriod {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub period: String,
    pub variable: String,
    pub moments: Moments,
}

pub fn summary_stats(panel: &TimeSeriesPanel, periods: &[SubPeriod]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for p in periods {
        let idx: Vec<usize> = (0..panel.len())
            .filter(|&i| panel.dates[i] >= p.start && panel.dates[i] <= p.end)
            .collect();
        if idx.len() < 4 {
            return Err(Error::InsufficientData(format!(
                "sub-period '{}' has {} observations",
                p.label,
                idx.len()
            )));
        }
        for (j, name) in panel.names.iter().enumerate() {
            let col: Vec<f64> = idx.iter().map(|&i| panel.values[i][j]).collect();
            rows.push(SummaryRow { period: p.label.clone(), variable: name.clone(), moments: moments(&col)? });
        }
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["period", "variable", "variance", "skewness", "kurtosis"])?;
    for r in rows {
        w.write_record([
            r.period.clone(),
            r.variable.clone(),
            format!("{:.3}", r.moments.variance),
            format!("{:.3}", r.moments.skewness),
            format!("{:.3}", r.moments.kurtosis),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn read(s: &str) -> Result<TimeSeriesPanel> {
        read_csv(s.as_bytes())
    }

    #[test]
    fn well_formed_file() {
        let p = read("date,a,b\n2021-01-01,1,2\n2021-01-04,1.5,2.5\n2021-01-05,2,3\n").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.names, vec!["a", "b"]);
        assert_eq!(p.values[2], vec![2.0, 3.0]);
    }

    #[test]
    fn shuffled_dates_name_the_row() {
        let err = read("date,a\n2021-01-02,1\n2021-01-01,2\n").unwrap_err();
        match err {
            Error::Data { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("not increasing"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn duplicate_dates_rejected() {
        assert!(matches!(
            read("date,a\n2021-01-02,1\n2021-01-02,2\n"),
            Err(Error::Data { line: 3, .. })
        ));
    }

    #[test]
    fn blank_cell_reports_row_and_column() {
        let err = read("date,a,b\n2021-01-01,1,2\n2021-01-02,,3\n").unwrap_err();
        match err {
            Error::Data { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("column 2"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn growth_rate_examples() {
        let p = TimeSeriesPanel::from_rows(
            vec![vec![100.0, 100.0, 100.0], vec![110.0, 100.0, 95.0]],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let g = growth_rates(&p).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g.values[0][0] - 10.0).abs() < 1e-12);
        assert_eq!(g.values[0][1], 0.0);
        assert!((g.values[0][2] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn growth_rejects_non_positive_prices() {
        let p = TimeSeriesPanel::from_rows(vec![vec![1.0], vec![0.0]], vec!["a".into()]).unwrap();
        assert!(growth_rates(&p).is_err());
    }

    #[test]
    fn standardize_two_points() {
        let p = TimeSeriesPanel::from_rows(vec![vec![-1.0], vec![1.0]], vec!["a".into()]).unwrap();
        let (z, s) = standardize(&p).unwrap();
        assert_eq!(s.means[0], 0.0);
        assert!((s.sds[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((z.values[0][0] + 0.70710678).abs() < 1e-8);
        assert!((z.values[1][0] - 0.70710678).abs() < 1e-8);
        let back = destandardize(&z, &s);
        assert!((back.values[0][0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_an_error() {
        let p = TimeSeriesPanel::from_rows(vec![vec![3.0]; 5], vec!["a".into()]).unwrap();
        assert!(matches!(standardize(&p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = moments(&x).unwrap();
        assert!((m.variance - 1.0).abs() < 0.05);
        assert!(m.skewness.abs() < 0.1);
        assert!((m.kurtosis - 3.0).abs() < 0.3);
    }

    #[test]
    fn short_sub_period_rejected() {
        let p = TimeSeriesPanel::from_rows(vec![vec![1.0], vec![2.0], vec![4.0], vec![3.0], vec![5.0]], vec!["a".into()])
            .unwrap();
        let periods = [SubPeriod { label: "x".into(), start: p.dates[0], end: p.dates[2] }];
        assert!(summary_stats(&p, &periods).is_err());
        let periods = [SubPeriod { label: "all".into(), start: p.dates[0], end: p.dates[4] }];
        let rows = summary_stats(&p, &periods).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].moments.variance - 2.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn growth_rates_reconstruct_prices(
            start in 1.0f64..100.0,
            steps in proptest::collection::vec(-0.5f64..0.5, 2..40),
        ) {
            let mut prices = vec![start];
            for s in &steps {
                let last = *prices.last().unwrap();
                prices.push(last * (1.0 + s));
            }
            let p = TimeSeriesPanel::from_rows(prices.iter().map(|&x| vec![x]).collect(), vec!["a".into()]).unwrap();
            let g = growth_rates(&p).unwrap();
            let mut level = start;
            for (i, row) in g.values.iter().enumerate() {
                level *= 1.0 + row[0] / 100.0;
                prop_assert!((level - prices[i + 1]).abs() < 1e-9 * prices[i + 1].max(1.0));
            }
        }

        #[test]
        fn moments_are_shift_and_permutation_invariant(
            x in proptest::collection::vec(-10.0f64..10.0, 6..50),
            shift in -100.0f64..100.0,
        ) {
            let m = moments(&x).unwrap();
            prop_assume!(m.variance > 1e-6);
            let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let ms = moments(&shifted).unwrap();
            prop_assert!((m.skewness - ms.skewness).abs() < 1e-6);
            prop_assert!((m.kurtosis - ms.kurtosis).abs() < 1e-6);
            let mut rev = x.clone();
            rev.reverse();
            let mr = moments(&rev).unwrap();
            prop_assert!((m.variance - mr.variance).abs() < 1e-9 * m.variance.max(1.0));
            prop_assert!((m.kurtosis - mr.kurtosis).abs() < 1e-9 * m.kurtosis);
        }

        #[test]
        fn standardize_is_affine_invariant(
            x in proptest::collection::vec(-10.0f64..10.0, 4..30),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let p1 = TimeSeriesPanel::from_rows(x.iter().map(|&v| vec![v]).collect(), vec!["a".into()]).unwrap();
            let p2 = TimeSeriesPanel::from_rows(x.iter().map(|&v| vec![a * v + b]).collect(), vec!["a".into()]).unwrap();
            if let (Ok((z1, _)), Ok((z2, _))) = (standardize(&p1), standardize(&p2)) {
                for (r1, r2) in z1.values.iter().zip(&z2.values) {
                    prop_assert!((r1[0] - r2[0]).abs() < 1e-8);
                }
            }
        }
    }
}

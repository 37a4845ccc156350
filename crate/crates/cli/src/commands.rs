use std::path::{Path, PathBuf};
use std::time::Instant;

use qvar::data::{growth_rates, load_csv, standardize, summary_stats, write_summary_csv, SubPeriod, TimeSeriesPanel};
use qvar::domain::build_var_design;
use qvar::evaluate::{render_score_table, write_score_table_csv, write_weights_csv};
use qvar::exec::derive_seed;
use qvar::forecast::{
    read_records_csv, rearrange_quantiles, run_backtest, write_records_csv, ForecastRecord, OriginResult,
};
use qvar::mcmc::{initialize, run_chain_from, PosteriorDraws};
use qvar::simstudy::{run_simulation_study, simulate_dgp};
use qvar::Execution;

use crate::config::{Config, DataTransform};
use crate::output::{sha256_hex, write_failures_csv, write_file, Checkpoint};
use crate::Failure;

pub struct Context {
    pub cfg: Config,
    pub out: PathBuf,
}

impl Context {
    fn exec(&self) -> Execution {
        if self.cfg.run.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn seed(&self) -> u64 {
        self.cfg.run.seed
    }
}

fn read_panel(path: &Path, transform: &DataTransform) -> Result<TimeSeriesPanel, Failure> {
    let panel = load_csv(path).map_err(|e| match e {
        qvar::Error::Io(io) => Failure::io(path.display(), io),
        other => Failure::Lib(other),
    })?;
    Ok(match transform {
        DataTransform::None => panel,
        DataTransform::Growth => growth_rates(&panel)?,
    })
}

pub fn simulate(ctx: &Context) -> Result<(), Failure> {
    let sim = simulate_dgp(&ctx.cfg.dgp(), ctx.seed())?;
    let start = ctx.cfg.simulate.start_date;
    let dates = (0..sim.panel.len()).map(|i| start + chrono::Days::new(i as u64)).collect();
    let panel = TimeSeriesPanel::new(dates, sim.panel.values.clone(), sim.panel.names.clone())?;
    write_file(&ctx.out, "panel.csv", |b| panel.write_csv(b))?;
    write_file(&ctx.out, "truth_b.csv", |b| {
        let mut w = csv::Writer::from_writer(b);
        let mut header = vec!["equation".to_string()];
        header.extend(panel.names.iter().map(|n| format!("lag1_{n}")));
        w.write_record(&header)?;
        for i in 0..sim.b.nrows() {
            let mut rec = vec![panel.names[i].clone()];
            rec.extend((0..sim.b.ncols()).map(|l| sim.b[(i, l)].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    write_file(&ctx.out, "truth_log_variance.csv", |b| {
        let mut w = csv::Writer::from_writer(b);
        let mut header = vec!["date".to_string()];
        header.extend(panel.names.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in panel.dates.iter().zip(&sim.h) {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    })?;
    println!("simulated {} rows of {} series into {}", panel.len(), panel.n_vars(), ctx.out.display());
    Ok(())
}

fn file_id(model_id: &str) -> String {
    model_id.to_ascii_lowercase()
}

fn print_acceptance(model_id: &str, post: &PosteriorDraws, secs: f64) {
    println!("{model_id}: {} draws in {secs:.1}s{}", post.n_draws(), if post.approximate { " (parallel h-paths)" } else { "" });
    println!("  {:<12} {:>6} {:>8} {:>8}", "block", "target", "rate", "final20");
    for a in &post.acceptance {
        println!("  {:<12} {:>6.2} {:>8.4} {:>8.4}", a.block, a.target, a.rate(), a.tail_rate());
    }
}

pub fn estimate(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let mut panel = read_panel(cfg.data_path()?, &cfg.data.transform)?;
    if cfg.data.standardize {
        panel = standardize(&panel)?.0;
    }
    let levels = cfg.levels(panel.n_vars())?;
    let design = build_var_design(&panel, cfg.model.lag_order, cfg.model.intercept)?;
    for (ri, regime) in cfg.estimate_regimes()?.into_iter().enumerate() {
        let spec = cfg.template(regime)?.spec(levels.clone());
        let start = Instant::now();
        let init = initialize(&spec, &design)?;
        let post = run_chain_from(&spec, &design, init, derive_seed(ctx.seed(), &[ri as u64]), ctx.exec())?;
        let id = file_id(regime.model_id());
        write_file(&ctx.out, &format!("draws_{id}.csv"), |b| post.write_beta_csv(b))?;
        write_file(&ctx.out, &format!("acceptance_{id}.csv"), |b| post.write_acceptance_csv(b))?;
        write_file(&ctx.out, &format!("paths_{id}.csv"), |b| post.write_paths_csv(b))?;
        print_acceptance(regime.model_id(), &post, start.elapsed().as_secs_f64());
    }
    Ok(())
}

fn backtest_fingerprint(ctx: &Context, plan: &qvar::forecast::BacktestPlan, data: &[u8]) -> String {
    let text = format!("{plan:?}|{:?}|{}|{}", ctx.cfg.data.transform, ctx.seed(), sha256_hex(data));
    sha256_hex(text.as_bytes())
}

pub fn backtest(ctx: &Context, stop_after: Option<usize>) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let path = cfg.data_path()?;
    let panel = read_panel(path, &cfg.data.transform)?;
    let plan = cfg.plan()?;
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path.display(), e))?;
    let (checkpoint, resumed) = Checkpoint::open(&ctx.out, &backtest_fingerprint(ctx, &plan, &bytes))?;
    if !resumed.done.is_empty() {
        println!("resuming: {} origins already complete", resumed.done.len());
    }
    let total = plan.origins(panel.len()).len();
    let mut fresh = 0usize;
    let mut save_error = None;
    let result = run_backtest(&panel, &plan, ctx.seed(), ctx.exec(), &resumed.done, |date, res| {
        let saved = match res {
            OriginResult::Done(recs) => checkpoint.save_records(date, recs),
            OriginResult::Failed(f) => checkpoint.save_failure(f),
        };
        if let Err(e) = saved {
            save_error = Some(e);
            return Err(qvar::Error::InvalidParameter("checkpoint write failed".into()));
        }
        fresh += 1;
        if stop_after.is_some_and(|n| fresh >= n) {
            return Err(qvar::Error::InvalidParameter(format!("stopped after {fresh} origins")));
        }
        Ok(())
    });
    if let Some(e) = save_error {
        return Err(e);
    }
    let output = match result {
        Ok(o) => o,
        Err(_) if stop_after.is_some_and(|n| fresh >= n) => {
            println!("stopped after {fresh} new origins; checkpoint kept");
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let mut records: Vec<ForecastRecord> = resumed.records;
    records.extend(output.records);
    // Checkpointed origins precede the new ones only if they were earlier; restore
    // chronological order without disturbing the order inside an origin.
    records.sort_by_key(|r| r.origin);
    let crossings = rearrange_quantiles(&mut records, plan.rearrange);
    let mut failures = resumed.failures;
    failures.extend(output.failures);
    failures.sort_by_key(|f| f.origin);
    write_file(&ctx.out, "forecasts.csv", |b| write_records_csv(&records, b))?;
    write_file(&ctx.out, "failures.csv", |b| write_failures_csv(&failures, b))?;
    checkpoint.remove()?;
    println!(
        "{} records from {} of {total} origins ({} skipped), {crossings} quantile crossings{}",
        records.len(),
        total - failures.len(),
        failures.len(),
        if plan.rearrange { " rearranged" } else { "" }
    );
    Ok(())
}

pub fn evaluate(ctx: &Context, records: Option<PathBuf>, realized: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let records_path = records
        .or_else(|| cfg.evaluate.records.clone())
        .unwrap_or_else(|| ctx.out.join("forecasts.csv"));
    let realized_path = match realized.or_else(|| cfg.evaluate.realized.clone()) {
        Some(p) => p,
        None => cfg.data_path()?.to_path_buf(),
    };
    let file = std::fs::File::open(&records_path).map_err(|e| Failure::io(records_path.display(), e))?;
    let recs = read_records_csv(file)?;
    let panel = read_panel(&realized_path, &cfg.data.transform)?;
    let ev = qvar::evaluate::evaluate_records(&recs, &panel, &cfg.evaluate.benchmark)?;
    write_file(&ctx.out, "scores.csv", |b| write_score_table_csv(&ev.table, b))?;
    write_file(&ctx.out, "weights.csv", |b| write_weights_csv(&ev.weights, b))?;
    let mut all = recs.clone();
    all.extend(ev.combined.iter().cloned());
    write_file(&ctx.out, "combined.csv", |b| write_records_csv(&all, b))?;
    print!("{}", render_score_table(&ev.table));
    Ok(())
}

pub fn report(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let mut did = false;
    if let Some(path) = cfg.data.path.as_deref() {
        let panel = read_panel(path, &cfg.data.transform)?;
        let mut periods = cfg.periods();
        if periods.is_empty() {
            periods.push(SubPeriod {
                label: "full".into(),
                start: panel.dates[0],
                end: *panel.dates.last().expect("non-empty panel"),
            });
        }
        let rows = summary_stats(&panel, &periods)?;
        write_file(&ctx.out, "summary.csv", |b| write_summary_csv(&rows, b))?;
        println!("{:<12} {:<12} {:>10} {:>10} {:>10}", "period", "variable", "variance", "skewness", "kurtosis");
        for r in &rows {
            println!(
                "{:<12} {:<12} {:>10.4} {:>10.4} {:>10.4}",
                r.period, r.variable, r.moments.variance, r.moments.skewness, r.moments.kurtosis
            );
        }
        did = true;
    }
    if cfg.report.study {
        let study = cfg.study()?;
        let start = Instant::now();
        let rep = run_simulation_study(&study, ctx.seed(), ctx.exec())?;
        write_file(&ctx.out, "study.csv", |b| rep.write_csv(b))?;
        write_file(&ctx.out, "study_replications.csv", |b| rep.write_replications_csv(b))?;
        let meta = format!(
            "seed = {}\nreplications = {}\ndropped = {:?}\nconfig_sha256 = {}\n",
            ctx.seed(),
            study.replications,
            rep.dropped,
            sha256_hex(format!("{study:?}").as_bytes())
        );
        crate::output::write_atomic(&ctx.out.join("study_metadata.txt"), meta.as_bytes())?;
        println!("{:<6} {:<12} {:>10} {:>10} {:>10} {:>10}", "tau", "model", "MMAD", "FN", "MMAD/b", "FN/b");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        for r in &rep.rows {
            println!(
                "{:<6} {:<12} {:>10.4} {:>10.4} {:>10} {:>10}",
                r.tau, r.model_id, r.mmad, r.fn_error, opt(r.mmad_ratio), opt(r.fn_ratio)
            );
        }
        println!("study finished in {:.1}s", start.elapsed().as_secs_f64());
        did = true;
    }
    if !did {
        return Err(Failure::Config("report: set data.path and/or report.study = true".into()));
    }
    Ok(())
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qvar::data::load_csv;
use qvar::forecast::read_records_csv;

fn qvar(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qvar"));
    cmd.args(args).env("RUST_LOG", "error");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(out.status.success(), "exit {:?}\nstdout:\n{stdout}\nstderr:\n{}", out.status, String::from_utf8_lossy(&out.stderr));
    stdout
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SIM: &str = "[simulate]\nn = 2\nlen = 40\n";

/// Simulates a small panel into `dir/sim` and returns its path.
fn simulated_panel(dir: &Path, len: usize) -> PathBuf {
    let cfg = write_config(dir, &format!("[simulate]\nn = 2\nlen = {len}\n"));
    let out = dir.join("sim");
    ok(&qvar(&["simulate", "--config", s(&cfg), "--seed", "5", "--out", s(&out)], &[]));
    out.join("panel.csv")
}

#[test]
fn simulate_writes_loadable_files_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIM);
    let out = dir.path().join("o");
    ok(&qvar(&["simulate", "--config", s(&cfg), "--out", s(&out)], &[]));
    let panel = load_csv(out.join("panel.csv")).unwrap();
    assert_eq!((panel.len(), panel.n_vars()), (40, 2));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for f in ["panel.csv", "truth_b.csv", "truth_log_variance.csv"] {
        assert!(manifest.lines().any(|l| l.ends_with(&format!("  {f}"))), "{manifest}");
    }
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIM);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&qvar(&["simulate", "--config", s(&cfg), "--seed", "9", "--out", s(&a)], &[]));
    ok(&qvar(&["simulate", "--config", s(&cfg), "--seed", "9", "--out", s(&b)], &[]));
    ok(&qvar(&["simulate", "--config", s(&cfg), "--seed", "10", "--out", s(&c)], &[]));
    let read = |d: &Path| fs::read(d.join("manifest.txt")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\nn = 2\nlen = forty\n");
    let out = qvar(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cfg.toml:3:"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), "[simulate]\nn = 2\nlenght = 40\n");
    let out = qvar(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cfg.toml:3:"), "{}", stderr(&out));
}

#[test]
fn env_override_changes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SIM);
    let out = dir.path().join("o");
    ok(&qvar(&["simulate", "--config", s(&cfg), "--out", s(&out)], &[("QVAR_SIMULATE_LEN", "25")]));
    assert_eq!(load_csv(out.join("panel.csv")).unwrap().len(), 25);
    let bad = qvar(&["simulate", "--config", s(&cfg), "--out", s(&out)], &[("QVAR_SIMULATE_LEN", "\"x\"")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[data]\npath = \"/nonexistent/panel.csv\"\n");
    let out = qvar(&["estimate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))], &[]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn explosive_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("date,a\n");
    for i in 0..30 {
        let v = if i % 2 == 0 { 1e300 } else { -1e300 };
        csv.push_str(&format!("2001-01-{:02},{v}\n", i + 1));
    }
    fs::write(dir.path().join("p.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "[data]\npath = \"{}\"\n[model]\nregimes = [\"QVAR-GARCH\"]\n[mcmc]\nburn_in = 10\nkeep = 10\n",
            s(&dir.path().join("p.csv"))
        ),
    );
    let out = qvar(&["estimate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn estimate_toy_runs_and_reports_acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let panel = simulated_panel(dir.path(), 60);
    let cfg = write_config(
        dir.path(),
        &format!(
            "[data]\npath = \"{}\"\n[model]\nregimes = [\"QVAR-SV\", \"QVAR-GARCH\"]\nquantiles = [0.3]\n\
             [mcmc]\nburn_in = 200\nkeep = 200\n",
            s(&panel)
        ),
    );
    let out = dir.path().join("o");
    let stdout = ok(&qvar(&["estimate", "--config", s(&cfg), "--out", s(&out)], &[]));
    assert!(stdout.contains("QVAR-SV") && stdout.contains("QVAR-GARCH"), "{stdout}");
    for id in ["qvar-sv", "qvar-garch"] {
        let draws = fs::read_to_string(out.join(format!("draws_{id}.csv"))).unwrap();
        assert_eq!(draws.lines().count(), 201);
        let acc = fs::read_to_string(out.join(format!("acceptance_{id}.csv"))).unwrap();
        for line in acc.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            for c in &cols[3..5] {
                let v: f64 = c.parse().unwrap();
                assert!((0.0..=1.0).contains(&v), "{line}");
            }
        }
        assert!(out.join(format!("paths_{id}.csv")).exists());
    }
}

#[test]
fn estimate_single_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\nn = 1\nlen = 50\n");
    let sim = dir.path().join("sim");
    ok(&qvar(&["simulate", "--config", s(&cfg), "--out", s(&sim)], &[]));
    let cfg = write_config(
        dir.path(),
        &format!(
            "[data]\npath = \"{}\"\n[model]\nregimes = [\"QVAR\"]\n[mcmc]\nburn_in = 100\nkeep = 100\n",
            s(&sim.join("panel.csv"))
        ),
    );
    let stdout = ok(&qvar(&["estimate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))], &[]));
    assert!(stdout.contains("delta2[0]"), "{stdout}");
}

fn backtest_config(dir: &Path, panel: &Path) -> PathBuf {
    write_config(
        dir,
        &format!(
            "[data]\npath = \"{}\"\n[mcmc]\nburn_in = 30\nkeep = 30\n\
             [backtest]\nwindow_length = 30\nhorizons = [1, 2]\nquantile_grid = [0.25, 0.75]\n\
             models = [\"QVAR\", \"QVAR-SV\"]\nn_paths = 3\n",
            s(panel)
        ),
    )
}

#[test]
fn backtest_record_count_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    // 41 rows, window 30, max horizon 2: origins at rows 29..=38, i.e. 10 origins.
    let panel = simulated_panel(dir.path(), 41);
    let cfg = backtest_config(dir.path(), &panel);
    let full = dir.path().join("full");
    ok(&qvar(&["backtest", "--config", s(&cfg), "--out", s(&full)], &[]));
    let records = read_records_csv(fs::File::open(full.join("forecasts.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 10 * 2 * 2 * 2 * 2);
    assert!(!full.join("checkpoint").exists());

    let resumed = dir.path().join("resumed");
    let first = ok(&qvar(&["backtest", "--config", s(&cfg), "--out", s(&resumed), "--stop-after", "4"], &[]));
    assert!(first.contains("checkpoint kept"), "{first}");
    assert!(!resumed.join("forecasts.csv").exists());
    let second = ok(&qvar(&["backtest", "--config", s(&cfg), "--out", s(&resumed)], &[]));
    assert!(second.contains("resuming"), "{second}");
    assert_eq!(fs::read(full.join("forecasts.csv")).unwrap(), fs::read(resumed.join("forecasts.csv")).unwrap());
    assert_eq!(fs::read(full.join("manifest.txt")).unwrap(), fs::read(resumed.join("manifest.txt")).unwrap());

    // A checkpoint from another seed is refused.
    ok(&qvar(&["backtest", "--config", s(&cfg), "--out", s(&resumed), "--stop-after", "1"], &[]));
    let clash = qvar(&["backtest", "--config", s(&cfg), "--out", s(&resumed), "--seed", "77"], &[]);
    assert_eq!(clash.status.code(), Some(2));

    // Thread count does not change the output.
    let one = dir.path().join("one");
    ok(&qvar(&["backtest", "--config", s(&cfg), "--out", s(&one), "--threads", "1"], &[]));
    assert_eq!(fs::read(full.join("forecasts.csv")).unwrap(), fs::read(one.join("forecasts.csv")).unwrap());

    // Evaluate with the default records location and a missing benchmark.
    let stdout = ok(&qvar(&["evaluate", "--config", s(&cfg), "--out", s(&full)], &[]));
    assert!(stdout.contains("QVAR-SV"));
    let combined = read_records_csv(fs::File::open(full.join("combined.csv")).unwrap()).unwrap();
    assert!(combined.iter().any(|r| r.model_id == "COMB-TV"));
    assert!(combined.iter().any(|r| r.model_id == "COMB-AVG"));
    let missing = qvar(&["evaluate", "--config", s(&cfg), "--out", s(&full)], &[("QVAR_EVALUATE_BENCHMARK", "QVAR-GARCH")]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("evaluate.benchmark"), "{}", stderr(&missing));
}

fn fixture(dir: &Path, models: &[(&str, f64)]) -> (PathBuf, PathBuf) {
    let mut realized = String::from("date,x\n");
    for d in 1..=8 {
        realized.push_str(&format!("2020-01-{d:02},0\n"));
    }
    let mut recs = String::from("origin_date,horizon,tau,variable,model_id,q_hat_std,q_hat_raw\n");
    for d in 1..=7 {
        for (m, q) in models {
            recs.push_str(&format!("2020-01-{d:02},1,0.5,x,{m},{q},{q}\n"));
        }
    }
    let (rp, fp) = (dir.join("realized.csv"), dir.join("records.csv"));
    fs::write(&rp, realized).unwrap();
    fs::write(&fp, recs).unwrap();
    (rp, fp)
}

#[test]
fn evaluate_single_model_has_unit_ratios_and_no_combinations() {
    let dir = tempfile::tempdir().unwrap();
    let (rp, fp) = fixture(dir.path(), &[("QVAR", -2.0)]);
    let out = dir.path().join("o");
    ok(&qvar(&["evaluate", "--records", s(&fp), "--realized", s(&rp), "--out", s(&out)], &[]));
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    let rows: Vec<&str> = scores.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').nth(5), Some("1"));
    let combined = read_records_csv(fs::File::open(out.join("combined.csv")).unwrap()).unwrap();
    assert!(combined.iter().all(|r| r.model_id == "QVAR"));
}

#[test]
fn evaluate_two_model_fixture_weights() {
    let dir = tempfile::tempdir().unwrap();
    // Realized values are 0, so the scores are 0.5·|q|: 1 for QVAR and 3 for QVAR-SV.
    let (rp, fp) = fixture(dir.path(), &[("QVAR", -2.0), ("QVAR-SV", -6.0)]);
    let out = dir.path().join("o");
    ok(&qvar(&["evaluate", "--records", s(&fp), "--realized", s(&rp), "--out", s(&out)], &[]));
    let weights = fs::read_to_string(out.join("weights.csv")).unwrap();
    let tv: Vec<(String, String, f64)> = weights
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[4].to_string(), c[5].parse().unwrap())
        })
        .collect();
    // Nothing realized at the first origin: equal weights.
    for (d, _, w) in &tv {
        if d == "2020-01-01" {
            assert_eq!(*w, 0.5);
        }
    }
    for (d, m, w) in &tv {
        if d != "2020-01-01" {
            let expected = if m == "QVAR" { 0.75 } else { 0.25 };
            assert!((w - expected).abs() < 1e-12, "{d} {m} {w}");
        }
    }
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    let sv = scores.lines().find(|l| l.contains(",QVAR-SV,")).unwrap();
    assert_eq!(sv.split(',').nth(5), Some("3"));
    let combined = read_records_csv(fs::File::open(out.join("combined.csv")).unwrap()).unwrap();
    assert!(combined.iter().any(|r| r.model_id == "COMB-TV"));
}

#[test]
fn misaligned_records_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let (rp, fp) = fixture(dir.path(), &[("QVAR", -2.0)]);
    let mut text = fs::read_to_string(&fp).unwrap();
    text.push_str("2021-06-01,1,0.5,x,QVAR,0,0\n");
    fs::write(&fp, text).unwrap();
    let out = qvar(&["evaluate", "--records", s(&fp), "--realized", s(&rp), "--out", s(&dir.path().join("o"))], &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("2021-06-01"), "{}", stderr(&out));
}

#[test]
fn report_summary_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let panel = simulated_panel(dir.path(), 60);
    let cfg = write_config(dir.path(), &format!("[data]\npath = \"{}\"\n", s(&panel)));
    let out = dir.path().join("o");
    ok(&qvar(&["report", "--config", s(&cfg), "--out", s(&out)], &[]));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let none = qvar(&["report", "--out", s(&out)], &[]);
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn report_runs_small_study() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[simulate]\nn = 2\nlen = 40\n[mcmc]\nburn_in = 30\nkeep = 30\n\
         [study]\nreplications = 3\nquantile_grid = [0.5]\nmodels = [\"QVAR\", \"QVAR-SV\"]\n[report]\nstudy = true\n",
    );
    let out = dir.path().join("o");
    let stdout = ok(&qvar(&["report", "--config", s(&cfg), "--out", s(&out)], &[]));
    assert!(stdout.contains("MMAD"));
    let study = fs::read_to_string(out.join("study.csv")).unwrap();
    assert_eq!(study.lines().count(), 3);
    assert!(fs::read_to_string(out.join("study_metadata.txt")).unwrap().contains("config_sha256"));
}

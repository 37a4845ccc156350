//! Output files, the hash manifest and the backtest checkpoint.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use qvar::forecast::{read_records_csv, write_records_csv, ForecastRecord, OriginFailure};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST: &str = "manifest.txt";
pub const CHECKPOINT_DIR: &str = "checkpoint";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to `path` through a temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Failure::io(tmp.display(), e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Failure::io(tmp.display(), e))?;
    fs::rename(&tmp, path).map_err(|e| Failure::io(path.display(), e))
}

/// Renders into memory with `render`, then writes `out/name`.
pub fn write_file<F>(out: &Path, name: &str, render: F) -> Result<(), Failure>
where
    F: FnOnce(&mut Vec<u8>) -> qvar::Result<()>,
{
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_atomic(&out.join(name), &buf)
}

/// `manifest.txt`: one `<sha256>  <path>` line per regular file under `out`, sorted.
pub fn write_manifest(out: &Path) -> Result<(), Failure> {
    let mut files = Vec::new();
    collect(out, out, &mut files)?;
    files.sort();
    let mut text = String::new();
    for rel in files {
        if rel == MANIFEST {
            continue;
        }
        let bytes = fs::read(out.join(&rel)).map_err(|e| Failure::io(&rel, e))?;
        text.push_str(&format!("{}  {rel}\n", sha256_hex(&bytes)));
    }
    write_atomic(&out.join(MANIFEST), text.as_bytes())
}

fn collect(root: &Path, dir: &Path, files: &mut Vec<String>) -> Result<(), Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::io(dir.display(), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Failure::io(dir.display(), e))?;
        let path = entry.path();
        if path.is_dir() {
            collect(root, &path, files)?;
        } else {
            let rel = path.strip_prefix(root).expect("inside root");
            files.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

/// Per-origin checkpoint: `<date>.csv` holds the records of a finished origin,
/// `<date>.failed` the reason an origin was skipped. `fingerprint` ties the
/// directory to one plan, data set and seed.
pub struct Checkpoint {
    dir: PathBuf,
}

pub struct Resumed {
    pub done: Vec<NaiveDate>,
    pub records: Vec<ForecastRecord>,
    pub failures: Vec<OriginFailure>,
}

impl Checkpoint {
    pub fn open(out: &Path, fingerprint: &str) -> Result<(Self, Resumed), Failure> {
        let dir = out.join(CHECKPOINT_DIR);
        let fp_path = dir.join("fingerprint");
        let mut resumed = Resumed { done: Vec::new(), records: Vec::new(), failures: Vec::new() };
        if dir.exists() {
            let old = fs::read_to_string(&fp_path).unwrap_or_default();
            if old.trim() != fingerprint {
                return Err(Failure::Config(format!(
                    "{} belongs to a different plan, data set or seed; remove it to start over",
                    dir.display()
                )));
            }
            let mut names: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| Failure::io(dir.display(), e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            names.sort();
            for path in names {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let Ok(date) = NaiveDate::parse_from_str(stem, "%Y-%m-%d") else { continue };
                match path.extension().and_then(|e| e.to_str()) {
                    Some("csv") => {
                        let f = fs::File::open(&path).map_err(|e| Failure::io(path.display(), e))?;
                        resumed.records.extend(read_records_csv(f)?);
                    }
                    Some("failed") => {
                        let text = fs::read_to_string(&path).map_err(|e| Failure::io(path.display(), e))?;
                        resumed.failures.push(parse_failure(date, &text));
                    }
                    _ => continue,
                }
                resumed.done.push(date);
            }
        } else {
            fs::create_dir_all(&dir).map_err(|e| Failure::io(dir.display(), e))?;
            write_atomic(&fp_path, fingerprint.as_bytes())?;
        }
        Ok((Self { dir }, resumed))
    }

    pub fn save_records(&self, date: NaiveDate, records: &[ForecastRecord]) -> Result<(), Failure> {
        let mut buf = Vec::new();
        write_records_csv(records, &mut buf)?;
        write_atomic(&self.dir.join(format!("{date}.csv")), &buf)
    }

    pub fn save_failure(&self, f: &OriginFailure) -> Result<(), Failure> {
        let text = format!("{}\n{}\n{}\n", f.model_id, f.tau, f.message);
        write_atomic(&self.dir.join(format!("{}.failed", f.origin)), text.as_bytes())
    }

    pub fn remove(self) -> Result<(), Failure> {
        fs::remove_dir_all(&self.dir).map_err(|e| Failure::io(self.dir.display(), e))
    }
}

fn parse_failure(origin: NaiveDate, text: &str) -> OriginFailure {
    let mut lines = text.lines();
    let model_id = lines.next().unwrap_or_default().to_string();
    let tau = lines.next().and_then(|t| t.parse().ok()).unwrap_or(f64::NAN);
    let message = lines.collect::<Vec<_>>().join("\n");
    OriginFailure { origin, model_id, tau, message }
}

pub fn write_failures_csv<W: Write>(failures: &[OriginFailure], writer: W) -> qvar::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["origin_date", "model_id", "tau", "message"])?;
    for f in failures {
        w.write_record([f.origin.to_string(), f.model_id.clone(), f.tau.to_string(), f.message.clone()])?;
    }
    w.flush()?;
    Ok(())
}

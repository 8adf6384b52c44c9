//! Configuration-driven runs: each experiment writes CSV tables and a plain
//! `key = value` manifest into the output directory.
//!
//! With a single seed the tables go directly into the output directory; with
//! several, into one `seed-<s>` subdirectory per seed. Runs are deterministic:
//! the same configuration produces byte-identical files.

mod config;
mod experiments;

pub use config::{Experiment, ExperimentConfig, GridConfig, RunConfig};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";

/// Name of the environment variable capping the worker threads (0 = automatic).
pub const THREADS_VAR: &str = "PARAHOM_THREADS";

/// Tables and manifest entries of one seed.
#[derive(Clone, Debug, Default)]
pub(crate) struct SeedOutput {
    pub entries: Vec<(String, String)>,
    pub files: Vec<(&'static str, String)>,
    pub gate_failures: Vec<String>,
}

impl SeedOutput {
    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn gate(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.gate_failures.push(what.into());
        }
    }
}

/// Exit status for an error: 2 for bad input, 3 for solver failures, 4 for gate failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::InvalidEnsemble(_)
        | Error::InvalidSolverConfig(_)
        | Error::InvalidTwoScale(_)
        | Error::Ellipticity(_)
        | Error::CylinderOutOfBounds(_)
        | Error::MissingManifest(_) => 2,
        Error::Gate(_) => 4,
        _ => 3,
    }
}

/// Reads `PARAHOM_THREADS`; unset means automatic.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_VAR}={v} is not a count"))),
        Err(_) => Ok(0),
    }
}

/// Runs the experiment in a thread pool sized by `PARAHOM_THREADS` and writes
/// its artifacts. Returns the output directory; a failed invariant gate is
/// reported as [`Error::Gate`] after the artifacts are written.
pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| execute(cfg))
}

fn execute(cfg: &RunConfig) -> Result<PathBuf> {
    let seeds = cfg.seeds();
    let outputs = seeds
        .iter()
        .map(|&seed| experiments::run_seed(cfg, seed))
        .collect::<Result<Vec<_>>>()?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "parahom_version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "experiment = {}", cfg.experiment.name.name());
    let _ = writeln!(manifest, "seeds = {seeds:?}");
    for line in cfg.echo() {
        let _ = writeln!(manifest, "{line}");
    }
    let mut failures = Vec::new();
    for (seed, out) in seeds.iter().zip(&outputs) {
        let target = if seeds.len() == 1 { dir.clone() } else { dir.join(format!("seed-{seed}")) };
        fs::create_dir_all(&target)?;
        for (name, body) in &out.files {
            fs::write(target.join(name), body)?;
        }
        for (k, v) in &out.entries {
            let _ = writeln!(manifest, "seed.{seed}.{k} = {v}");
        }
        failures.extend(out.gate_failures.iter().map(|f| format!("seed {seed}: {f}")));
    }
    let _ = writeln!(manifest, "gates = {}", if failures.is_empty() { "pass" } else { "fail" });
    for f in &failures {
        let _ = writeln!(manifest, "gate_failure = {f}");
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    if failures.is_empty() {
        Ok(dir.clone())
    } else {
        Err(Error::Gate(failures.join("; ")))
    }
}

/// Keys of the manifest worth showing, in file order (the config echo is skipped).
fn summary_lines(manifest: &str) -> Vec<(&str, &str)> {
    manifest
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .filter(|(k, _)| !k.starts_with("config."))
        .collect()
}

/// Human-readable summary of a run directory. With `gnuplot`, every CSV table
/// also gets a whitespace-separated `.dat` twin with a `#` header.
pub fn report(dir: &Path, gnuplot: bool) -> Result<String> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(Error::MissingManifest(dir.to_path_buf()));
    }
    let manifest = fs::read_to_string(&path)?;
    let lines = summary_lines(&manifest);
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "run in {}", dir.display());
    for (k, v) in &lines {
        let _ = writeln!(out, "  {k:<width$}  {v}");
    }
    let tables = csv_files(dir)?;
    if !tables.is_empty() {
        let _ = writeln!(out, "tables:");
    }
    for t in &tables {
        let rows = fs::read_to_string(t)?.lines().count().saturating_sub(1);
        let _ = writeln!(out, "  {} ({rows} rows)", t.strip_prefix(dir).unwrap_or(t).display());
        if gnuplot {
            let body = fs::read_to_string(t)?;
            let mut dat = String::new();
            for (i, line) in body.lines().enumerate() {
                let row = line.replace(',', " ");
                let _ = writeln!(dat, "{}{row}", if i == 0 { "# " } else { "" });
            }
            fs::write(t.with_extension("dat"), dat)?;
        }
    }
    Ok(out)
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            out.extend(csv_files(&p)?);
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    Ok(out)
}

//! Experiment orchestration: seeded Monte Carlo sweeps over a worker pool,
//! CSV tables and run manifests.
//!
//! Every trial derives its generator from `(master_seed, trial index)` and
//! results are collected in index order, so the tables do not depend on the
//! number of workers.

mod config;
mod experiments;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::RngSeed;
use crate::error::{Error, Result};

pub use config::{
    ConvergenceConfig, ExperimentConfig, IncoherenceConfig, LandscapeExpConfig, LooExpConfig,
    NoiseScalingConfig, PhaseTransitionConfig, RunConfig,
};
pub use experiments::{
    db, exp_convergence, exp_incoherence, exp_landscape, exp_loo, exp_noise_scaling,
    exp_phase_transition, loo_reports, ls_slope, monotone_violations, transition_midpoint,
    NoiseScalingRow, PhaseTransitionRow, NOISE_METRICS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Convergence,
    PhaseTransition,
    Incoherence,
    NoiseScaling,
    Landscape,
    Loo,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Convergence => "convergence",
            Experiment::PhaseTransition => "phase_transition",
            Experiment::Incoherence => "incoherence",
            Experiment::NoiseScaling => "noise_scaling",
            Experiment::Landscape => "landscape",
            Experiment::Loo => "loo",
        }
    }
}

/// Outcome of one Monte Carlo trial. A trial that hits a numeric failure is
/// kept with `success = false` and the error message.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: RngSeed,
    /// Grid point the trial belongs to, e.g. `n=100` or `p=0.05,vanilla`.
    pub label: String,
    pub success: bool,
    pub iterations: usize,
    pub metrics: Vec<(String, f64)>,
    pub wall_time: f64,
    pub failure: Option<String>,
}

impl TrialResult {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(k, _)| k == name)
            .map(|&(_, v)| v)
    }
}

/// A named acceptance assertion evaluated on the experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    /// Column index by header name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    pub tables: Vec<Table>,
    pub trials: Vec<TrialResult>,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `sha256("blob <len>\0" || bytes)` in hex.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Map `f` over `items` on a dedicated pool of `workers` threads, keeping
/// input order.
pub fn parallel_map<T, R, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers == 0 {
        return Err(Error::invalid("workers must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Run one trial body, turning an error into a failed result.
pub(crate) fn run_trial<F>(trial: usize, seed: RngSeed, label: String, body: F) -> TrialResult
where
    F: FnOnce() -> Result<(bool, usize, Vec<(String, f64)>)>,
{
    let start = Instant::now();
    let (success, iterations, metrics, failure) = match body() {
        Ok((s, it, m)) => (s, it, m, None),
        Err(e) => (false, 0, Vec::new(), Some(e.to_string())),
    };
    TrialResult {
        trial,
        seed,
        label,
        success,
        iterations,
        metrics,
        wall_time: start.elapsed().as_secs_f64(),
        failure,
    }
}

pub(crate) fn trials_table(name: &str, trials: &[TrialResult]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "label",
            "trial",
            "master_seed",
            "stream_index",
            "success",
            "iterations",
            "failure",
        ],
    );
    for r in trials {
        t.push(vec![
            r.label.clone(),
            r.trial.to_string(),
            r.seed.master_seed.to_string(),
            r.seed.stream_index.to_string(),
            r.success.to_string(),
            r.iterations.to_string(),
            r.failure.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn run_experiment(experiment: Experiment, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match experiment {
        Experiment::Convergence => exp_convergence(cfg),
        Experiment::PhaseTransition => exp_phase_transition(cfg),
        Experiment::Incoherence => exp_incoherence(cfg),
        Experiment::NoiseScaling => exp_noise_scaling(cfg),
        Experiment::Landscape => exp_landscape(cfg),
        Experiment::Loo => exp_loo(cfg),
    }
}

/// Write every table as `<dir>/<name>.csv` plus `<dir>/<experiment>.manifest.toml`.
/// Returns the paths written.
pub fn write_output(
    dir: &Path,
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
    wall_time: f64,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut outputs = String::new();
    for table in &out.tables {
        let text = table.to_csv()?;
        let path = dir.join(format!("{}.csv", table.name));
        fs::write(&path, &text)?;
        let _ = writeln!(
            outputs,
            "\"{}.csv\" = \"{}\"",
            table.name,
            blob_hash(text.as_bytes())
        );
        written.push(path);
    }

    let echo = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let mut m = String::new();
    let _ = writeln!(m, "experiment = \"{}\"", out.experiment.name());
    let _ = writeln!(m, "input_hash = \"{}\"", blob_hash(echo.as_bytes()));
    let _ = writeln!(m, "wall_time_seconds = {wall_time:.3}");
    let _ = writeln!(m, "all_checks_passed = {}", out.all_passed());
    let _ = writeln!(m, "\n[outputs]\n{outputs}");
    for c in &out.checks {
        let _ = writeln!(m, "[[checks]]");
        let _ = writeln!(m, "name = {:?}", c.name);
        let _ = writeln!(m, "passed = {}", c.passed);
        let _ = writeln!(m, "detail = {:?}\n", c.detail);
    }
    let _ = writeln!(m, "# effective configuration\n[config]");
    // Nest the echoed config under [config].
    for line in echo.lines() {
        if let Some(section) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let _ = writeln!(m, "[config.{section}]");
        } else {
            let _ = writeln!(m, "{line}");
        }
    }
    let path = dir.join(format!("{}.manifest.toml", out.experiment.name()));
    fs::write(&path, m)?;
    written.push(path);
    Ok(written)
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == points {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

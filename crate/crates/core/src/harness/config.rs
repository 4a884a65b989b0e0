use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leave_one_out::Problem;

/// Full harness configuration, read from TOML. Every key is optional.
///
/// ```toml
/// [run]
/// master_seed = 7
/// workers = 4
///
/// [phase_transition]
/// trials = 20
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub convergence: ConvergenceConfig,
    pub phase_transition: PhaseTransitionConfig,
    pub incoherence: IncoherenceConfig,
    pub noise_scaling: NoiseScalingConfig,
    pub landscape: LandscapeExpConfig,
    pub loo: LooExpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub workers: usize,
    pub output_path: String,
    /// Restrict experiments that cover several problems to one.
    pub problem: Option<Problem>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            workers: 1,
            output_path: "results".into(),
            problem: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub pr_trials: usize,
    pub mc_trials: usize,
    pub bd_trials: usize,
    /// Target relative error and the iteration budgets to reach it.
    pub tol: f64,
    pub pr_n: Vec<usize>,
    pub pr_m_ratio: f64,
    pub pr_eta: f64,
    pub pr_iters: usize,
    pub mc_n: Vec<usize>,
    pub mc_r: usize,
    pub mc_p: f64,
    pub mc_eta: f64,
    pub mc_iters: usize,
    pub mc_record_every: usize,
    pub bd_k: Vec<usize>,
    pub bd_m_ratio: f64,
    pub bd_eta: f64,
    pub bd_iters: usize,
    /// Required fraction of successful trials per size.
    pub min_success: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            pr_trials: 20,
            mc_trials: 10,
            bd_trials: 20,
            tol: 1e-5,
            pr_n: vec![20, 100],
            pr_m_ratio: 10.0,
            pr_eta: 0.1,
            pr_iters: 200,
            mc_n: vec![1000],
            mc_r: 10,
            mc_p: 0.1,
            mc_eta: 0.2,
            mc_iters: 500,
            mc_record_every: 5,
            bd_k: vec![20, 100],
            bd_m_ratio: 10.0,
            bd_eta: 0.5,
            bd_iters: 200,
            min_success: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseTransitionConfig {
    pub n: usize,
    pub r: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_points: usize,
    pub trials: usize,
    pub eta: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Subset of `vanilla`, `projected`, `regularized`.
    pub algorithms: Vec<String>,
    /// Row-norm radius of the projected baseline; unset means twice the
    /// largest row norm of the spectral estimate.
    pub projection_radius: Option<f64>,
    pub reg_lambda: f64,
    pub reg_alpha: Option<f64>,
    pub min_rate_at_max: f64,
    pub max_rate_at_min: f64,
    pub max_monotone_violations: usize,
    pub max_midpoint_shift: usize,
}

impl Default for PhaseTransitionConfig {
    fn default() -> Self {
        Self {
            n: 500,
            r: 10,
            p_min: 0.01,
            p_max: 0.1,
            p_points: 11,
            trials: 10,
            eta: 0.2,
            max_iters: 10_000,
            tol: 1e-5,
            algorithms: vec!["vanilla".into(), "projected".into(), "regularized".into()],
            projection_radius: None,
            reg_lambda: 1.0,
            reg_alpha: None,
            min_rate_at_max: 0.9,
            max_rate_at_min: 0.1,
            max_monotone_violations: 1,
            max_midpoint_shift: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncoherenceConfig {
    pub n: Vec<usize>,
    pub m_ratio: f64,
    pub eta: f64,
    pub iters: usize,
    pub trials: usize,
    pub bound: f64,
}

impl Default for IncoherenceConfig {
    fn default() -> Self {
        Self {
            n: vec![20, 100, 200],
            m_ratio: 10.0,
            eta: 0.1,
            iters: 200,
            trials: 1,
            bound: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseScalingConfig {
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub eta: f64,
    pub iters: usize,
    pub trials: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_points: usize,
    pub slope_tol: f64,
    pub snr_rel_tol: f64,
    pub min_snr_span_db: f64,
}

impl Default for NoiseScalingConfig {
    fn default() -> Self {
        Self {
            n: 500,
            r: 10,
            p: 0.1,
            eta: 0.2,
            iters: 600,
            trials: 20,
            sigma_min: 1e-5,
            sigma_max: 1e-3,
            sigma_points: 9,
            slope_tol: 0.15,
            snr_rel_tol: 0.1,
            min_snr_span_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeExpConfig {
    /// Master seeds `master_seed, master_seed + 1, ...`.
    pub seeds: usize,
    /// Subset of `pr`, `mc`, `bd`, `align`.
    pub suites: Vec<String>,
}

impl Default for LandscapeExpConfig {
    fn default() -> Self {
        Self {
            seeds: 3,
            suites: vec!["pr".into(), "mc".into(), "bd".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LooExpConfig {
    pub iters: usize,
    pub pr_n: usize,
    pub pr_m: usize,
    pub pr_eta: f64,
    pub pr_l: Vec<usize>,
    pub mc_n: usize,
    pub mc_r: usize,
    pub mc_p: f64,
    pub mc_eta: f64,
    pub mc_l: Vec<usize>,
    pub bd_k: usize,
    pub bd_m: usize,
    pub bd_eta: f64,
    pub bd_l: Vec<usize>,
    /// Max-over-l gap may grow to this multiple of its value at `t = 0`.
    pub gap_factor: f64,
    /// Bound on the time-averaged held-out ratio for phase retrieval.
    pub pr_ratio_bound: f64,
    /// `|a_l^H (x^(l) - x*)| <= c sqrt(log m) ||x^(l) - x*||` for deconvolution.
    pub bd_heldout_factor: f64,
}

impl Default for LooExpConfig {
    fn default() -> Self {
        Self {
            iters: 150,
            pr_n: 100,
            pr_m: 1000,
            pr_eta: 0.1,
            pr_l: (0..10).collect(),
            mc_n: 300,
            mc_r: 3,
            mc_p: 0.3,
            mc_eta: 0.2,
            mc_l: (0..5).collect(),
            bd_k: 50,
            bd_m: 500,
            bd_eta: 0.5,
            bd_l: (0..10).collect(),
            gap_factor: 10.0,
            pr_ratio_bound: 3.0,
            bd_heldout_factor: 8.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Switch the sweeps to their full-size grids.
    pub fn full_scale(mut self) -> Self {
        self.phase_transition.p_points = 51;
        self.phase_transition.trials = 50;
        if !self.incoherence.n.contains(&1000) {
            self.incoherence.n.push(1000);
        }
        self
    }

    pub fn problem_enabled(&self, p: Problem) -> bool {
        self.run.problem.is_none_or(|q| q == p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.run.workers == 0 {
            return bad("run.workers must be >= 1");
        }
        let c = &self.convergence;
        if c.pr_trials.min(c.mc_trials).min(c.bd_trials) == 0
            || c.pr_n.is_empty()
            || c.mc_n.is_empty()
            || c.bd_k.is_empty()
        {
            return bad("convergence: trials >= 1 and nonempty size grids required");
        }
        if c.mc_record_every == 0 {
            return bad("convergence.mc_record_every must be >= 1");
        }
        let pt = &self.phase_transition;
        if pt.trials == 0 || pt.p_points == 0 || pt.algorithms.is_empty() {
            return bad("phase_transition: trials, p_points and algorithms must be nonempty");
        }
        if !(0.0 < pt.p_min && pt.p_min <= pt.p_max && pt.p_max <= 1.0) {
            return bad("phase_transition: need 0 < p_min <= p_max <= 1");
        }
        for a in &pt.algorithms {
            if !["vanilla", "projected", "regularized"].contains(&a.as_str()) {
                return Err(Error::Config(format!("unknown algorithm {a:?}")));
            }
        }
        if self.incoherence.trials == 0 || self.incoherence.n.is_empty() {
            return bad("incoherence: trials >= 1 and nonempty n grid required");
        }
        let ns = &self.noise_scaling;
        if ns.trials == 0
            || ns.sigma_points < 2
            || !(0.0 < ns.sigma_min && ns.sigma_min < ns.sigma_max)
        {
            return bad(
                "noise_scaling: trials >= 1 and at least two positive sigma values required",
            );
        }
        if self.landscape.seeds == 0 || self.landscape.suites.is_empty() {
            return bad("landscape: seeds >= 1 and nonempty suites required");
        }
        for s in &self.landscape.suites {
            if !["pr", "mc", "bd", "align"].contains(&s.as_str()) {
                return Err(Error::Config(format!("unknown landscape suite {s:?}")));
            }
        }
        let l = &self.loo;
        if l.pr_l.is_empty() || l.mc_l.is_empty() || l.bd_l.is_empty() {
            return bad("loo: index lists must be nonempty");
        }
        Ok(())
    }
}

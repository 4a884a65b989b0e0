use crate::blind_deconvolution::{bd_run, BdConfig};
use crate::ensembles::{
    gen_blind_deconv, gen_matrix_completion_unit, gen_phase_retrieval, RngSeed,
};
use crate::error::{Error, Result};
use crate::landscape::{
    alignment_convexity, bd_landscape, mc_landscape, pr_landscape, AlignConvexityConfig,
    BdLandscapeConfig, LandscapeReport, McLandscapeConfig, PrLandscapeConfig,
};
use crate::leave_one_out::{bd_loo_analysis, mc_loo_analysis, pr_loo_analysis, LooReport, Problem};
use crate::matrix_completion::{
    mc_run, mc_run_from, mc_snr, mc_spectral_init, Baseline, McConfig, StopRule,
};
use crate::phase_retrieval::{pr_run, PrConfig};

use super::{
    fmt_f64, log_grid, parallel_map, run_trial, trials_table, Check, Experiment, ExperimentConfig,
    ExperimentOutput, Table, TrialResult,
};

fn rate(trials: &[&TrialResult]) -> f64 {
    trials.iter().filter(|t| t.success).count() as f64 / trials.len() as f64
}

// ---------------------------------------------------------------------------
// convergence curves

#[derive(Clone)]
struct ConvTask {
    problem: Problem,
    size: usize,
    trial: usize,
}

pub fn exp_convergence(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = &cfg.convergence;
    let seed = cfg.run.master_seed;
    let mut tasks = Vec::new();
    for (problem, sizes, trials) in [
        (Problem::PhaseRetrieval, &c.pr_n, c.pr_trials),
        (Problem::MatrixCompletion, &c.mc_n, c.mc_trials),
        (Problem::BlindDeconvolution, &c.bd_k, c.bd_trials),
    ] {
        if !cfg.problem_enabled(problem) {
            continue;
        }
        for &size in sizes {
            for trial in 0..trials {
                tasks.push(ConvTask {
                    problem,
                    size,
                    trial,
                });
            }
        }
    }

    // (trial result, curve rows (iter, metric, value))
    let results = parallel_map(cfg.run.workers, &tasks, |task| {
        let rs = RngSeed::new(seed, task.trial as u64);
        let mut curve: Vec<(usize, &'static str, f64)> = Vec::new();
        let label = format!("{}:{}", task.problem.tag(), task.size);
        let res = run_trial(task.trial, rs, label, || match task.problem {
            Problem::PhaseRetrieval => {
                let m = (c.pr_m_ratio * task.size as f64).round() as usize;
                let inst = gen_phase_retrieval(task.size, m, rs)?;
                let conf = PrConfig {
                    eta: c.pr_eta,
                    max_iters: c.pr_iters,
                    tol_rel: 0.0,
                    ..PrConfig::default()
                };
                let traj = pr_run(&inst, &conf)?;
                let mut hit = None;
                for rec in &traj.records {
                    curve.push((rec.iter, "rel_dist", rec.rel_dist));
                    if hit.is_none() && rec.rel_dist <= c.tol {
                        hit = Some(rec.iter);
                    }
                }
                Ok((
                    hit.is_some(),
                    hit.unwrap_or(traj.iterations),
                    vec![("rel_dist".into(), traj.last().rel_dist)],
                ))
            }
            Problem::MatrixCompletion => {
                let inst = gen_matrix_completion_unit(task.size, c.mc_r, c.mc_p, 0.0, rs)?;
                let conf = McConfig {
                    eta: c.mc_eta,
                    max_iters: c.mc_iters,
                    tol_rel: 0.0,
                    record_every: c.mc_record_every,
                    stop_rule: StopRule::MatrixFro,
                    ..McConfig::default()
                };
                let traj = mc_run(&inst, &conf)?;
                let mut hit = None;
                for rec in &traj.records {
                    let e = rec.errors;
                    curve.push((rec.iter, "mat_fro", e.mat_fro));
                    curve.push((rec.iter, "mat_op", e.mat_op));
                    curve.push((rec.iter, "mat_entrywise", e.err_entrywise));
                    if hit.is_none() && e.mat_fro.max(e.mat_op).max(e.err_entrywise) <= c.tol {
                        hit = Some(rec.iter);
                    }
                }
                let e = traj.last().errors;
                let metrics = vec![
                    ("mat_fro".into(), e.mat_fro),
                    ("mat_op".into(), e.mat_op),
                    ("mat_entrywise".into(), e.err_entrywise),
                ];
                Ok((hit.is_some(), hit.unwrap_or(traj.iterations), metrics))
            }
            Problem::BlindDeconvolution => {
                let m = (c.bd_m_ratio * task.size as f64).round() as usize;
                let inst = gen_blind_deconv(task.size, m, rs)?;
                let conf = BdConfig {
                    eta: c.bd_eta,
                    max_iters: c.bd_iters,
                    tol_rel: 0.0,
                    record_every: 1,
                };
                let traj = bd_run(&inst, &conf)?;
                let mut hit = None;
                for rec in &traj.records {
                    curve.push((rec.iter, "rel_fro", rec.rel_fro));
                    if hit.is_none() && rec.rel_fro <= c.tol {
                        hit = Some(rec.iter);
                    }
                }
                Ok((
                    hit.is_some(),
                    hit.unwrap_or(traj.iterations),
                    vec![("rel_fro".into(), traj.last().rel_fro)],
                ))
            }
        });
        (res, curve)
    })?;

    let mut table = Table::new(
        "convergence",
        &["problem", "size", "seed", "iter", "metric", "value"],
    );
    for (task, (res, curve)) in tasks.iter().zip(&results) {
        for &(iter, metric, value) in curve {
            table.push(vec![
                task.problem.tag().into(),
                task.size.to_string(),
                res.seed.stream_index.to_string(),
                iter.to_string(),
                metric.into(),
                fmt_f64(value),
            ]);
        }
    }
    let trials: Vec<TrialResult> = results.into_iter().map(|(r, _)| r).collect();

    let mut checks = Vec::new();
    let mut labels: Vec<&str> = trials.iter().map(|t| t.label.as_str()).collect();
    labels.dedup();
    for label in labels {
        let group: Vec<&TrialResult> = trials.iter().filter(|t| t.label == label).collect();
        let r = rate(&group);
        let budget = match label.split(':').next() {
            Some("pr") => c.pr_iters,
            Some("mc") => c.mc_iters,
            _ => c.bd_iters,
        };
        checks.push(Check::new(
            format!("convergence {label}"),
            r >= c.min_success,
            format!(
                "{}/{} trials reach {:e} within {budget} iterations (need {})",
                group.iter().filter(|t| t.success).count(),
                group.len(),
                c.tol,
                c.min_success
            ),
        ));
    }

    Ok(ExperimentOutput {
        experiment: Experiment::Convergence,
        tables: vec![table, trials_table("convergence_trials", &trials)],
        trials,
        checks,
    })
}

// ---------------------------------------------------------------------------
// phase transition

/// Success rate of one algorithm at one sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTransitionRow {
    pub algorithm: String,
    pub p_index: usize,
    pub p: f64,
    pub successes: usize,
    pub trials: usize,
}

impl PhaseTransitionRow {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Number of grid steps where the rate drops.
pub fn monotone_violations(rates: &[f64]) -> usize {
    rates.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Fractional grid index where the rate first reaches 1/2, by linear
/// interpolation. `None` when it never does.
pub fn transition_midpoint(rates: &[f64]) -> Option<f64> {
    let first = rates.iter().position(|&r| r >= 0.5)?;
    if first == 0 {
        return Some(0.0);
    }
    let (a, b) = (rates[first - 1], rates[first]);
    Some(first as f64 - 1.0 + (0.5 - a) / (b - a))
}

pub fn exp_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = &cfg.phase_transition;
    let ps = log_grid(c.p_min, c.p_max, c.p_points);
    let tasks: Vec<(usize, usize)> = (0..ps.len())
        .flat_map(|i| (0..c.trials).map(move |t| (i, t)))
        .collect();
    let seed = cfg.run.master_seed;

    // One task runs every algorithm from the same instance and spectral init.
    let results: Vec<Vec<TrialResult>> = parallel_map(cfg.run.workers, &tasks, |&(pi, trial)| {
        let rs = RngSeed::new(seed, trial as u64);
        let p = ps[pi];
        let inst = gen_matrix_completion_unit(c.n, c.r, p, 0.0, rs);
        let init = inst
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|inst| mc_spectral_init(inst).map_err(|e| e.to_string()));
        c.algorithms
            .iter()
            .map(|alg| {
                let label = format!("p={},{alg}", fmt_f64(p));
                run_trial(trial, rs, label, || {
                    let inst = inst
                        .as_ref()
                        .map_err(|e| Error::numeric(0, e.to_string()))?;
                    let x0 = init.clone().map_err(|e| Error::numeric(0, e))?;
                    let baseline = match alg.as_str() {
                        "projected" => Baseline::Projected {
                            radius: c.projection_radius,
                        },
                        "regularized" => Baseline::Regularized {
                            lambda: c.reg_lambda,
                            alpha: c.reg_alpha,
                        },
                        _ => Baseline::None,
                    };
                    let conf = McConfig {
                        eta: c.eta,
                        max_iters: c.max_iters,
                        tol_rel: c.tol,
                        record_every: c.max_iters.max(1),
                        stop_rule: StopRule::MatrixFro,
                        baseline,
                        keep_iterates: false,
                    };
                    let traj = mc_run_from(inst, &conf, x0)?;
                    Ok((
                        traj.converged,
                        traj.iterations,
                        vec![("mat_fro".into(), traj.last().errors.mat_fro)],
                    ))
                })
            })
            .collect()
    })?;

    let mut rows = Vec::new();
    for alg in &c.algorithms {
        for (pi, &p) in ps.iter().enumerate() {
            let k = c.algorithms.iter().position(|a| a == alg).unwrap_or(0);
            let group: Vec<&TrialResult> = tasks
                .iter()
                .zip(&results)
                .filter(|((i, _), _)| *i == pi)
                .map(|(_, r)| &r[k])
                .collect();
            rows.push(PhaseTransitionRow {
                algorithm: alg.clone(),
                p_index: pi,
                p,
                successes: group.iter().filter(|t| t.success).count(),
                trials: group.len(),
            });
        }
    }

    let mut table = Table::new(
        "phase_transition",
        &[
            "algorithm",
            "p_index",
            "p",
            "successes",
            "trials",
            "success_rate",
        ],
    );
    for r in &rows {
        table.push(vec![
            r.algorithm.clone(),
            r.p_index.to_string(),
            fmt_f64(r.p),
            r.successes.to_string(),
            r.trials.to_string(),
            fmt_f64(r.rate()),
        ]);
    }
    let trials: Vec<TrialResult> = results.into_iter().flatten().collect();

    let rates_of = |alg: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.algorithm == alg)
            .map(|r| r.rate())
            .collect()
    };
    let mut checks = Vec::new();
    if c.algorithms.iter().any(|a| a == "vanilla") {
        let v = rates_of("vanilla");
        let (lo, hi) = (v[0], v[v.len() - 1]);
        checks.push(Check::new(
            "vanilla success at largest p",
            hi >= c.min_rate_at_max,
            format!("rate {hi} (need >= {})", c.min_rate_at_max),
        ));
        checks.push(Check::new(
            "vanilla success at smallest p",
            lo <= c.max_rate_at_min,
            format!("rate {lo} (need <= {})", c.max_rate_at_min),
        ));
        let viol = monotone_violations(&v);
        checks.push(Check::new(
            "vanilla success monotone in p",
            viol <= c.max_monotone_violations,
            format!(
                "{viol} decreasing steps (allow {})",
                c.max_monotone_violations
            ),
        ));
        if c.algorithms.iter().any(|a| a == "regularized") {
            let (mv, mr) = (
                transition_midpoint(&v),
                transition_midpoint(&rates_of("regularized")),
            );
            let ok = matches!((mv, mr), (Some(a), Some(b)) if (a - b).abs() <= c.max_midpoint_shift as f64);
            checks.push(Check::new(
                "vanilla and regularized midpoints agree",
                ok,
                format!(
                    "midpoints {mv:?} vs {mr:?} grid points (allow {})",
                    c.max_midpoint_shift
                ),
            ));
        }
    }

    Ok(ExperimentOutput {
        experiment: Experiment::PhaseTransition,
        tables: vec![table, trials_table("phase_transition_trials", &trials)],
        trials,
        checks,
    })
}

// ---------------------------------------------------------------------------
// incoherence along the phase retrieval trajectory

pub fn exp_incoherence(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = &cfg.incoherence;
    let seed = cfg.run.master_seed;
    let tasks: Vec<(usize, usize)> =
        c.n.iter()
            .flat_map(|&n| (0..c.trials).map(move |t| (n, t)))
            .collect();
    let results = parallel_map(cfg.run.workers, &tasks, |&(n, trial)| {
        let rs = RngSeed::new(seed, trial as u64);
        let mut curve = Vec::new();
        let res = run_trial(trial, rs, format!("n={n}"), || {
            let m = (c.m_ratio * n as f64).round() as usize;
            let inst = gen_phase_retrieval(n, m, rs)?;
            let conf = PrConfig {
                eta: c.eta,
                max_iters: c.iters,
                tol_rel: 0.0,
                ..PrConfig::default()
            };
            let traj = pr_run(&inst, &conf)?;
            let mut worst: f64 = 0.0;
            let mut finite_start = true;
            for rec in &traj.records {
                curve.push((rec.iter, rec.incoherence_raw, rec.incoherence_diff));
                if rec.iter == 0 {
                    finite_start =
                        rec.incoherence_raw.is_finite() && rec.incoherence_diff.is_finite();
                }
                if rec.iter > 1 {
                    worst = worst.max(rec.incoherence_diff);
                }
            }
            Ok((
                finite_start && worst <= c.bound,
                traj.iterations,
                vec![("max_incoherence_diff".into(), worst)],
            ))
        });
        (res, curve)
    })?;

    let mut table = Table::new(
        "incoherence",
        &["n", "seed", "iter", "incoherence_raw", "incoherence_diff"],
    );
    for (&(n, _), (res, curve)) in tasks.iter().zip(&results) {
        for &(iter, raw, diff) in curve {
            table.push(vec![
                n.to_string(),
                res.seed.stream_index.to_string(),
                iter.to_string(),
                fmt_f64(raw),
                fmt_f64(diff),
            ]);
        }
    }
    let trials: Vec<TrialResult> = results.into_iter().map(|(r, _)| r).collect();
    let checks = trials
        .iter()
        .map(|t| {
            let worst = t.metric("max_incoherence_diff").unwrap_or(f64::NAN);
            Check::new(
                format!("incoherence {} seed {}", t.label, t.seed.stream_index),
                t.success,
                match &t.failure {
                    Some(f) => f.clone(),
                    None => format!(
                        "max over t > 1 of diff measure {worst:.4} (bound {})",
                        c.bound
                    ),
                },
            )
        })
        .collect();

    Ok(ExperimentOutput {
        experiment: Experiment::Incoherence,
        tables: vec![table, trials_table("incoherence_trials", &trials)],
        trials,
        checks,
    })
}

// ---------------------------------------------------------------------------
// noisy matrix completion

pub const NOISE_METRICS: [&str; 4] = ["err_fro", "err_op", "err_2inf", "err_entrywise"];

/// Trial-averaged quantities at one noise level; errors are squared relative
/// errors averaged before conversion to dB.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScalingRow {
    pub sigma: f64,
    pub snr: f64,
    pub snr_approx: f64,
    pub sq_errors: [f64; 4],
    pub trials: usize,
}

pub fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn exp_noise_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = &cfg.noise_scaling;
    let seed = cfg.run.master_seed;
    let sigmas = log_grid(c.sigma_min, c.sigma_max, c.sigma_points);
    let tasks: Vec<(usize, usize)> = (0..sigmas.len())
        .flat_map(|i| (0..c.trials).map(move |t| (i, t)))
        .collect();
    let trials = parallel_map(cfg.run.workers, &tasks, |&(si, trial)| {
        let rs = RngSeed::new(seed, trial as u64);
        let sigma = sigmas[si];
        run_trial(trial, rs, format!("sigma={}", fmt_f64(sigma)), || {
            let inst = gen_matrix_completion_unit(c.n, c.r, c.p, sigma, rs)?;
            let conf = McConfig {
                eta: c.eta,
                max_iters: c.iters,
                tol_rel: 0.0,
                record_every: c.iters.max(1),
                ..McConfig::default()
            };
            let traj = mc_run(&inst, &conf)?;
            let e = traj.last().errors;
            let mstar = inst.truth_matrix()?;
            let snr_approx = mstar.norm_squared() / ((c.n * c.n) as f64 * sigma * sigma);
            let metrics = vec![
                ("snr".into(), mc_snr(&inst)?),
                ("snr_approx".into(), snr_approx),
                ("err_fro".into(), e.err_fro.powi(2)),
                ("err_op".into(), e.err_op.powi(2)),
                ("err_2inf".into(), e.err_2inf.powi(2)),
                ("err_entrywise".into(), e.err_entrywise.powi(2)),
            ];
            let ok = metrics.iter().all(|(_, v)| v.is_finite());
            Ok((ok, traj.iterations, metrics))
        })
    })?;

    let mut rows = Vec::new();
    let mut snr_worst: f64 = 0.0;
    for (si, &sigma) in sigmas.iter().enumerate() {
        let group: Vec<&TrialResult> = tasks
            .iter()
            .zip(&trials)
            .filter(|((i, _), t)| *i == si && t.success)
            .map(|(_, t)| t)
            .collect();
        let mean =
            |k: &str| group.iter().filter_map(|t| t.metric(k)).sum::<f64>() / group.len() as f64;
        for t in &group {
            if let (Some(s), Some(a)) = (t.metric("snr"), t.metric("snr_approx")) {
                snr_worst = snr_worst.max((s - a).abs() / a);
            }
        }
        rows.push(NoiseScalingRow {
            sigma,
            snr: mean("snr"),
            snr_approx: mean("snr_approx"),
            sq_errors: NOISE_METRICS.map(mean),
            trials: group.len(),
        });
    }

    let mut table = Table::new(
        "noise_scaling",
        &[
            "sigma",
            "trials",
            "snr",
            "snr_db",
            "snr_approx_db",
            "metric",
            "sq_rel_error",
            "sq_rel_error_db",
        ],
    );
    for r in &rows {
        for (k, name) in NOISE_METRICS.iter().enumerate() {
            table.push(vec![
                fmt_f64(r.sigma),
                r.trials.to_string(),
                fmt_f64(r.snr),
                fmt_f64(db(r.snr)),
                fmt_f64(db(r.snr_approx)),
                (*name).into(),
                fmt_f64(r.sq_errors[k]),
                fmt_f64(db(r.sq_errors[k])),
            ]);
        }
    }

    let mut checks = Vec::new();
    let failed = trials.iter().filter(|t| !t.success).count();
    checks.push(Check::new(
        "noise trials completed",
        failed == 0,
        format!("{failed} failed trials"),
    ));
    let x: Vec<f64> = rows.iter().map(|r| db(r.snr)).collect();
    let span = x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "SNR span",
        span >= c.min_snr_span_db,
        format!("{span:.1} dB (need >= {})", c.min_snr_span_db),
    ));
    for (k, name) in NOISE_METRICS.iter().enumerate() {
        let y: Vec<f64> = rows.iter().map(|r| db(r.sq_errors[k])).collect();
        let slope = ls_slope(&x, &y);
        checks.push(Check::new(
            format!("slope {name}"),
            (slope + 1.0).abs() <= c.slope_tol,
            format!("{slope:.4} (need -1 +- {})", c.slope_tol),
        ));
    }
    checks.push(Check::new(
        "SNR approximation",
        snr_worst <= c.snr_rel_tol,
        format!("max relative gap {snr_worst:.4} (allow {})", c.snr_rel_tol),
    ));

    Ok(ExperimentOutput {
        experiment: Experiment::NoiseScaling,
        tables: vec![table, trials_table("noise_scaling_trials", &trials)],
        trials,
        checks,
    })
}

// ---------------------------------------------------------------------------
// landscape suites

pub fn exp_landscape(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = &cfg.landscape;
    let enabled = |s: &str| match s {
        "pr" => cfg.problem_enabled(Problem::PhaseRetrieval),
        "mc" => cfg.problem_enabled(Problem::MatrixCompletion),
        "bd" | "align" => cfg.problem_enabled(Problem::BlindDeconvolution),
        _ => false,
    };
    let tasks: Vec<(String, u64)> = c
        .suites
        .iter()
        .filter(|s| enabled(s))
        .flat_map(|s| (0..c.seeds as u64).map(move |k| (s.clone(), cfg.run.master_seed + k)))
        .collect();
    let reports: Vec<Result<LandscapeReport>> =
        parallel_map(cfg.run.workers, &tasks, |(suite, seed)| {
            match suite.as_str() {
                "pr" => pr_landscape(&PrLandscapeConfig::default(), *seed),
                "mc" => mc_landscape(&McLandscapeConfig::default(), *seed),
                "bd" => bd_landscape(&BdLandscapeConfig::default(), *seed),
                _ => alignment_convexity(&AlignConvexityConfig::default(), *seed),
            }
        })?;

    let mut table = Table::new(
        "landscape",
        &[
            "suite",
            "seed",
            "point",
            "min_curvature",
            "max_curvature",
            "lower_bound",
            "upper_bound",
        ],
    );
    let mut checks = Vec::new();
    for ((suite, seed), rep) in tasks.iter().zip(&reports) {
        match rep {
            Ok(rep) => {
                for p in &rep.points {
                    table.push(vec![
                        suite.clone(),
                        seed.to_string(),
                        p.point.to_string(),
                        fmt_f64(p.min_curvature),
                        fmt_f64(p.max_curvature),
                        fmt_f64(rep.lower_bound),
                        fmt_f64(rep.upper_bound),
                    ]);
                }
                checks.push(Check::new(
                    format!("landscape {suite} seed {seed}"),
                    rep.passed(),
                    format!(
                        "{} points x {} probes, curvature in [{:.4}, {:.4}], bounds [{:.4}, {:.4}], {} lower and {} upper failures",
                        rep.points.len(),
                        rep.probes,
                        rep.min_curvature(),
                        rep.max_curvature(),
                        rep.lower_bound,
                        rep.upper_bound,
                        rep.lower_failures,
                        rep.upper_failures
                    ),
                ));
            }
            Err(e) => checks.push(Check::new(
                format!("landscape {suite} seed {seed}"),
                false,
                e.to_string(),
            )),
        }
    }
    Ok(ExperimentOutput {
        experiment: Experiment::Landscape,
        tables: vec![table],
        trials: Vec::new(),
        checks,
    })
}

// ---------------------------------------------------------------------------
// leave-one-out proximity

/// Per-problem leave-one-out report with the acceptance checks applied.
pub fn loo_reports(cfg: &ExperimentConfig) -> Result<Vec<LooReport>> {
    let c = &cfg.loo;
    let rs = RngSeed::new(cfg.run.master_seed, 0);
    let problems: Vec<Problem> = [
        Problem::PhaseRetrieval,
        Problem::MatrixCompletion,
        Problem::BlindDeconvolution,
    ]
    .into_iter()
    .filter(|&p| cfg.problem_enabled(p))
    .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        problems
            .iter()
            .map(|p| match p {
                Problem::PhaseRetrieval => {
                    let inst = gen_phase_retrieval(c.pr_n, c.pr_m, rs)?;
                    let conf = PrConfig {
                        eta: c.pr_eta,
                        max_iters: c.iters,
                        tol_rel: 0.0,
                        ..PrConfig::default()
                    };
                    pr_loo_analysis(&inst, &conf, &c.pr_l)
                }
                Problem::MatrixCompletion => {
                    let inst = gen_matrix_completion_unit(c.mc_n, c.mc_r, c.mc_p, 0.0, rs)?;
                    let conf = McConfig {
                        eta: c.mc_eta,
                        max_iters: c.iters,
                        tol_rel: 0.0,
                        ..McConfig::default()
                    };
                    mc_loo_analysis(&inst, &conf, &c.mc_l)
                }
                Problem::BlindDeconvolution => {
                    let inst = gen_blind_deconv(c.bd_k, c.bd_m, rs)?;
                    let conf = BdConfig {
                        eta: c.bd_eta,
                        max_iters: c.iters,
                        tol_rel: 0.0,
                        record_every: 1,
                    };
                    bd_loo_analysis(&inst, &conf, &c.bd_l)
                }
            })
            .collect()
    })
}

pub fn exp_loo(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let c = &cfg.loo;
    let reports = loo_reports(cfg)?;
    let mut traces = Table::new(
        "loo",
        &["problem", "l", "iter", "gap", "heldout", "heldout_ratio"],
    );
    let mut maxes = Table::new("loo_max", &["problem", "iter", "max_gap", "argmax_l"]);
    let mut checks = Vec::new();
    for rep in &reports {
        let tag = rep.problem.tag();
        for tr in &rep.traces {
            for i in 0..tr.iters.len() {
                traces.push(vec![
                    tag.into(),
                    tr.l.to_string(),
                    tr.iters[i].to_string(),
                    fmt_f64(tr.gap[i]),
                    fmt_f64(tr.heldout[i]),
                    fmt_f64(tr.heldout_ratio[i]),
                ]);
            }
        }
        for i in 0..rep.iters.len() {
            maxes.push(vec![
                tag.into(),
                rep.iters[i].to_string(),
                fmt_f64(rep.max_gap[i]),
                rep.argmax_gap[i].to_string(),
            ]);
        }

        let (worst, init) = (rep.worst_gap(), rep.initial_gap());
        checks.push(Check::new(
            format!("loo {tag} gap stays glued"),
            worst <= c.gap_factor * init,
            format!(
                "max gap {worst:.4e}, initial {init:.4e} (allow x{})",
                c.gap_factor
            ),
        ));
        match rep.problem {
            Problem::PhaseRetrieval => {
                let n = c.pr_n as f64;
                let bound = 10.0 * (n.ln() / n).sqrt();
                checks.push(Check::new(
                    "loo pr gap within sqrt(log n / n) scale",
                    worst <= bound,
                    format!("max gap {worst:.4e} (allow {bound:.4e} for unit-norm truth)"),
                ));
                let mean_ratio = rep
                    .traces
                    .iter()
                    .map(|tr| tr.heldout_ratio.iter().sum::<f64>() / tr.heldout_ratio.len() as f64)
                    .fold(0.0, f64::max);
                checks.push(Check::new(
                    "loo pr held-out incoherence",
                    mean_ratio <= c.pr_ratio_bound,
                    format!(
                        "largest time-averaged ratio {mean_ratio:.4} (allow {})",
                        c.pr_ratio_bound
                    ),
                ));
            }
            Problem::BlindDeconvolution => {
                let worst_ratio = rep
                    .traces
                    .iter()
                    .flat_map(|tr| tr.heldout_ratio.iter().copied())
                    .fold(0.0, f64::max);
                checks.push(Check::new(
                    "loo bd held-out incoherence",
                    worst_ratio <= c.bd_heldout_factor,
                    format!(
                        "largest ratio {worst_ratio:.4} (allow {})",
                        c.bd_heldout_factor
                    ),
                ));
            }
            Problem::MatrixCompletion => {}
        }
    }
    Ok(ExperimentOutput {
        experiment: Experiment::Loo,
        tables: vec![traces, maxes],
        trials: Vec::new(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_interpolates() {
        assert_eq!(transition_midpoint(&[0.0, 0.0, 1.0]), Some(1.5));
        assert_eq!(transition_midpoint(&[0.0, 0.25, 0.75]), Some(1.5));
        assert_eq!(transition_midpoint(&[0.6, 1.0]), Some(0.0));
        assert_eq!(transition_midpoint(&[0.0, 0.1]), None);
    }

    #[test]
    fn monotone_count() {
        assert_eq!(monotone_violations(&[0.0, 0.5, 0.4, 1.0, 0.9]), 2);
        assert_eq!(monotone_violations(&[0.0, 0.0, 1.0]), 0);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 4.0 - 2.0 * v).collect();
        assert!((ls_slope(&x, &y) + 2.0).abs() < 1e-14);
    }
}

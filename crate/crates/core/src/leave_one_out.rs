//! Leave-one-out trajectories and their proximity to the true run.
//!
//! Each auxiliary run drops sample `l` (phase retrieval, blind
//! deconvolution) or replaces row and column `l` by their population values
//! (matrix completion), then runs the same gradient iteration from the
//! matching spectral initialization. The traces measure how far the
//! auxiliary iterates drift from the true ones and how incoherent they are
//! with the held-out design.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::blind_deconvolution::{BdConfig, BdObjective, BdState, BdTrajectory};
use crate::ensembles::{BlindDeconvInstance, MatrixCompletionInstance, PhaseRetrievalInstance};
use crate::error::{Error, Result};
use crate::matrix_completion::{McConfig, McObjective, McTrajectory};
use crate::numlin::{procrustes_align, scalar_align, two_to_inf_norm};
use crate::phase_retrieval::{PrConfig, PrObjective, PrTrajectory};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Problem {
    #[serde(rename = "pr")]
    PhaseRetrieval,
    #[serde(rename = "mc")]
    MatrixCompletion,
    #[serde(rename = "bd")]
    BlindDeconvolution,
}

impl Problem {
    pub fn tag(self) -> &'static str {
        match self {
            Problem::PhaseRetrieval => "pr",
            Problem::MatrixCompletion => "mc",
            Problem::BlindDeconvolution => "bd",
        }
    }
}

/// Proximity of one leave-one-out run to the true run, on the shared record grid.
///
/// `heldout` is the problem's held-out quantity:
/// - phase retrieval: `|a_l^T (x^{t,(l)} - x*)|`, and `heldout_ratio` divides
///   it by the full-run incoherence `max_j |a_j^T (x^t - x*)|`;
/// - matrix completion: `||(X^{t,(l)} H - X*)_{l,.}||`, ratio against `||X*||_{2,inf}`;
/// - blind deconvolution: `|a_l^H (x~^{t,(l)} - x*)|`, ratio against
///   `sqrt(log m) ||x~^{t,(l)} - x*||`.
#[derive(Debug, Clone, PartialEq)]
pub struct LooTrace {
    pub l: usize,
    pub iters: Vec<usize>,
    pub gap: Vec<f64>,
    pub heldout: Vec<f64>,
    pub heldout_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooReport {
    pub problem: Problem,
    pub traces: Vec<LooTrace>,
    pub iters: Vec<usize>,
    /// `max_l gap` at every record.
    pub max_gap: Vec<f64>,
    /// The `l` attaining `max_gap` (first one on ties).
    pub argmax_gap: Vec<usize>,
}

impl LooReport {
    /// Largest gap over all records and all `l`.
    pub fn worst_gap(&self) -> f64 {
        self.max_gap.iter().copied().fold(0.0, f64::max)
    }

    /// Gap at the first record, maximised over `l`.
    pub fn initial_gap(&self) -> f64 {
        self.max_gap.first().copied().unwrap_or(f64::NAN)
    }
}

/// Aggregates per-`l` traces over their common prefix of records.
pub fn loo_proximity_report(problem: Problem, traces: Vec<LooTrace>) -> Result<LooReport> {
    let first = traces
        .first()
        .ok_or_else(|| Error::invalid("no leave-one-out traces"))?;
    let len = traces.iter().map(|t| t.iters.len()).min().unwrap_or(0);
    for tr in &traces {
        if tr.iters[..len] != first.iters[..len] {
            return Err(Error::invalid(
                "leave-one-out traces use different record grids",
            ));
        }
    }
    let iters = first.iters[..len].to_vec();
    let mut max_gap = Vec::with_capacity(len);
    let mut argmax_gap = Vec::with_capacity(len);
    for i in 0..len {
        let (mut best, mut arg) = (f64::NEG_INFINITY, traces[0].l);
        for tr in &traces {
            if tr.gap[i] > best {
                best = tr.gap[i];
                arg = tr.l;
            }
        }
        max_gap.push(best);
        argmax_gap.push(arg);
    }
    Ok(LooReport {
        problem,
        traces,
        iters,
        max_gap,
        argmax_gap,
    })
}

fn common_len(a: &[usize], b: &[usize]) -> Result<usize> {
    let len = a.len().min(b.len());
    if a[..len] != b[..len] {
        return Err(Error::invalid(
            "true and leave-one-out runs use different record grids",
        ));
    }
    Ok(len)
}

// ---------------------------------------------------------------------------
// phase retrieval

/// Leave-one-out Wirtinger flow; the initial sign is the one closer to `x*`.
pub fn pr_loo_run(
    inst: &PhaseRetrievalInstance,
    config: &PrConfig,
    l: usize,
) -> Result<PrTrajectory> {
    let xstar = inst.truth()?;
    let obj = PrObjective::new(inst, Some(l))?;
    let mut x0 = obj.spectral_init()?;
    if (&x0 - xstar).norm() > (&x0 + xstar).norm() {
        x0 = -x0;
    }
    obj.run_from(config, x0)
}

/// Compares a true run with the `l`th leave-one-out run. The true run is
/// sign-aligned to `x*` through its initial point.
pub fn pr_loo_trace(
    inst: &PhaseRetrievalInstance,
    full: &PrTrajectory,
    loo: &PrTrajectory,
    l: usize,
) -> Result<LooTrace> {
    let xstar = inst.truth()?;
    let full_iters: Vec<usize> = full.records.iter().map(|r| r.iter).collect();
    let loo_iters: Vec<usize> = loo.records.iter().map(|r| r.iter).collect();
    let len = common_len(&full_iters, &loo_iters)?;
    let x0 = &full.iterates_kept[0];
    let s = if (x0 - xstar).norm() <= (x0 + xstar).norm() {
        1.0
    } else {
        -1.0
    };
    let a_l = inst.designs.row(l).transpose();
    let mut trace = LooTrace {
        l,
        iters: full_iters[..len].to_vec(),
        gap: Vec::with_capacity(len),
        heldout: Vec::with_capacity(len),
        heldout_ratio: Vec::with_capacity(len),
    };
    for i in 0..len {
        let xt = &full.iterates_kept[i] * s;
        let xl = &loo.iterates_kept[i];
        trace.gap.push((&xt - xl).norm());
        let held = a_l.dot(&(xl - xstar)).abs();
        let full_inc = (&inst.designs * (&xt - xstar)).amax();
        trace.heldout.push(held);
        trace.heldout_ratio.push(held / full_inc);
    }
    Ok(trace)
}

/// Runs the true trajectory and the leave-one-out runs for every index in
/// `ls` (in parallel), returning the aggregated report.
pub fn pr_loo_analysis(
    inst: &PhaseRetrievalInstance,
    config: &PrConfig,
    ls: &[usize],
) -> Result<LooReport> {
    let full = crate::phase_retrieval::pr_run(inst, config)?;
    let traces = ls
        .par_iter()
        .map(|&l| {
            let loo = pr_loo_run(inst, config, l)?;
            pr_loo_trace(inst, &full, &loo, l)
        })
        .collect::<Result<Vec<_>>>()?;
    loo_proximity_report(Problem::PhaseRetrieval, traces)
}

// ---------------------------------------------------------------------------
// matrix completion

/// Leave-one-out gradient descent with row and column `l` replaced by `M*`.
/// Iterates are always kept.
pub fn mc_loo_run(
    inst: &MatrixCompletionInstance,
    config: &McConfig,
    l: usize,
) -> Result<McTrajectory> {
    let obj = McObjective::new(inst, Some(l))?;
    let x0 = obj.spectral_init()?;
    let cfg = McConfig {
        keep_iterates: true,
        ..config.clone()
    };
    obj.run_from(&cfg, x0)
}

/// `min_R ||X^t H^t - X^{t,(l)} R||_F` along the records, plus the
/// held-out row error of the leave-one-out iterate.
pub fn mc_loo_trace(
    inst: &MatrixCompletionInstance,
    full: &McTrajectory,
    loo: &McTrajectory,
    l: usize,
) -> Result<LooTrace> {
    let xstar = inst.truth_factor()?;
    if full.iterates_kept.len() != full.records.len()
        || loo.iterates_kept.len() != loo.records.len()
    {
        return Err(Error::invalid(
            "leave-one-out comparison needs runs with kept iterates",
        ));
    }
    let full_iters: Vec<usize> = full.records.iter().map(|r| r.iter).collect();
    let loo_iters: Vec<usize> = loo.records.iter().map(|r| r.iter).collect();
    let len = common_len(&full_iters, &loo_iters)?;
    let scale = two_to_inf_norm(xstar);
    let mut trace = LooTrace {
        l,
        iters: full_iters[..len].to_vec(),
        gap: Vec::with_capacity(len),
        heldout: Vec::with_capacity(len),
        heldout_ratio: Vec::with_capacity(len),
    };
    for i in 0..len {
        let xt = &full.iterates_kept[i];
        let aligned: DMatrix<f64> = xt * procrustes_align(xt, xstar)?.rotation;
        let xl = &loo.iterates_kept[i];
        trace.gap.push(procrustes_align(xl, &aligned)?.residual);
        let hl = procrustes_align(xl, xstar)?.rotation;
        let row_err = ((xl * hl).row(l) - xstar.row(l)).norm();
        trace.heldout.push(row_err);
        trace.heldout_ratio.push(row_err / scale);
    }
    Ok(trace)
}

pub fn mc_loo_analysis(
    inst: &MatrixCompletionInstance,
    config: &McConfig,
    ls: &[usize],
) -> Result<LooReport> {
    let cfg = McConfig {
        keep_iterates: true,
        ..config.clone()
    };
    let full = crate::matrix_completion::mc_run(inst, &cfg)?;
    let traces = ls
        .par_iter()
        .map(|&l| {
            let loo = mc_loo_run(inst, &cfg, l)?;
            mc_loo_trace(inst, &full, &loo, l)
        })
        .collect::<Result<Vec<_>>>()?;
    loo_proximity_report(Problem::MatrixCompletion, traces)
}

// ---------------------------------------------------------------------------
// blind deconvolution

pub fn bd_loo_run(inst: &BlindDeconvInstance, config: &BdConfig, l: usize) -> Result<BdTrajectory> {
    let obj = BdObjective::new(inst, Some(l))?;
    let z0 = obj.spectral_init()?;
    obj.run_from(config, z0)
}

/// Distance of the leave-one-out iterate to the aligned true iterate
/// `z~^t`, and the held-out incoherence of the aligned leave-one-out iterate.
pub fn bd_loo_trace(
    inst: &BlindDeconvInstance,
    full: &BdTrajectory,
    loo: &BdTrajectory,
    l: usize,
) -> Result<LooTrace> {
    let (hs, xs) = inst.truth()?;
    let full_iters: Vec<usize> = full.records.iter().map(|r| r.iter).collect();
    let loo_iters: Vec<usize> = loo.records.iter().map(|r| r.iter).collect();
    let len = common_len(&full_iters, &loo_iters)?;
    let log_m = (inst.m as f64).ln().sqrt();
    let mut trace = LooTrace {
        l,
        iters: full_iters[..len].to_vec(),
        gap: Vec::with_capacity(len),
        heldout: Vec::with_capacity(len),
        heldout_ratio: Vec::with_capacity(len),
    };
    for i in 0..len {
        let zt = aligned_to(&full.iterates_kept[i], hs, xs)?;
        let zl = &loo.iterates_kept[i];
        let gap = scalar_align(&zl.h, &zl.x, &zt.h, &zt.x)?.objective.sqrt();
        trace.gap.push(gap);
        let zl_tilde = aligned_to(zl, hs, xs)?;
        let diff = &zl_tilde.x - xs;
        // row l of the design stores a_l^H
        let held = (inst.a.row(l) * &diff)[0].norm();
        trace.heldout.push(held);
        trace.heldout_ratio.push(held / (log_m * diff.norm()));
    }
    Ok(trace)
}

fn aligned_to(z: &BdState, hs: &DVector<C64>, xs: &DVector<C64>) -> Result<BdState> {
    let sol = scalar_align(&z.h, &z.x, hs, xs)?;
    Ok(z.rescaled(sol.alpha))
}

pub fn bd_loo_analysis(
    inst: &BlindDeconvInstance,
    config: &BdConfig,
    ls: &[usize],
) -> Result<LooReport> {
    let full = crate::blind_deconvolution::bd_run(inst, config)?;
    let traces = ls
        .par_iter()
        .map(|&l| {
            let loo = bd_loo_run(inst, config, l)?;
            bd_loo_trace(inst, &full, &loo, l)
        })
        .collect::<Result<Vec<_>>>()?;
    loo_proximity_report(Problem::BlindDeconvolution, traces)
}

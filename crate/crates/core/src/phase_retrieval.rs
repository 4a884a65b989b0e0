//! Wirtinger flow for real phase retrieval.
//!
//! Loss `f(x) = (1/4m) sum_j [(a_j^T x)^2 - y_j]^2`, spectral initialization
//! from `Y = (1/m) sum_j y_j a_j a_j^T`, and plain gradient steps. The
//! leave-one-out variants drop one sample from the sum but keep the `1/m`
//! normalisation.

use nalgebra::{DMatrix, DVector};

use crate::ensembles::PhaseRetrievalInstance;
use crate::error::{Error, Result};
use crate::numlin::top_eigs_sym;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Constant,
    /// `eta = c1 / (log n * ||x0||^2)`.
    LogScaled {
        c1: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrConfig {
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once `dist / ||x*|| <= tol_rel` (truth known).
    pub tol_rel: f64,
    pub record_every: usize,
    pub step_rule: StepRule,
}

impl Default for PrConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            max_iters: 1000,
            tol_rel: 1e-5,
            record_every: 1,
            step_rule: StepRule::Constant,
        }
    }
}

impl PrConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!(
                "step size must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if !(self.tol_rel >= 0.0) {
            return Err(Error::invalid("tol_rel must be >= 0"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be >= 1"));
        }
        if let StepRule::LogScaled { c1 } = self.step_rule {
            if !(c1 > 0.0) {
                return Err(Error::invalid("log-scaled step rule needs c1 > 0"));
            }
        }
        Ok(())
    }
}

/// Metrics at one recorded iteration. Truth-dependent fields are NaN when
/// the instance carries no ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub dist: f64,
    pub rel_dist: f64,
    /// `max_j |a_j^T x| / (sqrt(log n) ||x*||)`
    pub incoherence_raw: f64,
    /// `max_j |a_j^T (x - x*)| / (sqrt(log n) ||x*||)`, sign of `x*` matched to `x`.
    pub incoherence_diff: f64,
}

#[derive(Debug, Clone)]
pub struct PrTrajectory {
    pub records: Vec<PrRecord>,
    /// Iterates at the recorded iterations, same order as `records`.
    pub iterates_kept: Vec<DVector<f64>>,
    pub final_iterate: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub eta: f64,
}

impl PrTrajectory {
    pub fn last(&self) -> &PrRecord {
        self.records
            .last()
            .expect("trajectory always holds the initial record")
    }
}

/// Sample-restricted view of the loss; `skip` removes one sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PrObjective<'a> {
    inst: &'a PhaseRetrievalInstance,
    skip: Option<usize>,
}

impl<'a> PrObjective<'a> {
    pub(crate) fn new(inst: &'a PhaseRetrievalInstance, skip: Option<usize>) -> Result<Self> {
        if let Some(l) = skip {
            if l >= inst.m {
                return Err(Error::invalid(format!(
                    "left-out index {l} out of range (m = {})",
                    inst.m
                )));
            }
            if inst.m == 1 {
                return Err(Error::invalid(
                    "leaving out the only sample leaves an empty loss",
                ));
            }
        }
        Ok(Self { inst, skip })
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        Error::check_dim(self.inst.n, x.len())
    }

    fn residual_weights(&self, ax: &DVector<f64>, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
        let y = &self.inst.measurements;
        let mut w = DVector::from_fn(ax.len(), |j, _| f(ax[j], y[j]));
        if let Some(l) = self.skip {
            w[l] = 0.0;
        }
        w
    }

    pub(crate) fn loss(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        let ax = &self.inst.designs * x;
        let w = self.residual_weights(&ax, |a, y| (a * a - y).powi(2));
        Ok(w.sum() / (4.0 * self.inst.m as f64))
    }

    pub(crate) fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let ax = &self.inst.designs * x;
        let w = self.residual_weights(&ax, |a, y| (a * a - y) * a);
        Ok(self.inst.designs.tr_mul(&w) / self.inst.m as f64)
    }

    pub(crate) fn hessian_apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        self.check(v)?;
        let ax = &self.inst.designs * x;
        let av = &self.inst.designs * v;
        let w = self.residual_weights(&ax, |a, y| 3.0 * a * a - y);
        Ok(self.inst.designs.tr_mul(&w.component_mul(&av)) / self.inst.m as f64)
    }

    pub(crate) fn hessian_quadform(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.check(v)?;
        let w = self.curvature_weights(x)?;
        let av = &self.inst.designs * v;
        Ok(w.dot(&av.component_mul(&av)))
    }

    /// `(3 (a_j^T x)^2 - y_j) / m`, the per-sample Hessian weights at `x`.
    pub(crate) fn curvature_weights(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let ax = &self.inst.designs * x;
        Ok(self.residual_weights(&ax, |a, y| 3.0 * a * a - y) / self.inst.m as f64)
    }

    /// `(1/m) sum_{j != skip} y_j a_j a_j^T`
    pub(crate) fn data_matrix(&self) -> DMatrix<f64> {
        let y = &self.inst.measurements;
        let mut weighted = self.inst.designs.clone();
        for (j, mut row) in weighted.row_iter_mut().enumerate() {
            let w = if Some(j) == self.skip { 0.0 } else { y[j] };
            row *= w;
        }
        weighted.tr_mul(&self.inst.designs) / self.inst.m as f64
    }

    /// Leading eigenvector of the data matrix scaled by `sqrt(lambda_1 / 3)`.
    pub(crate) fn spectral_init(&self) -> Result<DVector<f64>> {
        let eig = top_eigs_sym(&self.data_matrix(), 1)?;
        let lambda = eig.values[0];
        if !(lambda > 0.0) {
            return Err(Error::numeric(
                0,
                format!("leading eigenvalue {lambda} is not positive"),
            ));
        }
        Ok(eig.vectors.column(0) * (lambda / 3.0).sqrt())
    }

    pub(crate) fn run_from(&self, config: &PrConfig, x0: DVector<f64>) -> Result<PrTrajectory> {
        config.validate()?;
        self.check(&x0)?;
        let n = self.inst.n;
        let eta = match config.step_rule {
            StepRule::Constant => config.eta,
            StepRule::LogScaled { c1 } => {
                let denom = (n as f64).ln() * x0.norm_squared();
                if !(denom > 0.0) {
                    return Err(Error::invalid("log-scaled step rule needs n >= 2 and x0 != 0"));
                }
                c1 / denom
            }
        };
        let truth = self.inst.truth.as_ref();

        let mut x = x0;
        let mut records = Vec::new();
        let mut kept = Vec::new();
        let mut converged = false;
        let mut t = 0;
        loop {
            let grad = self.gradient(&x)?;
            let rec = self.record(t, &x, &grad, truth)?;
            let done = match truth {
                Some(_) => rec.rel_dist <= config.tol_rel,
                None => rec.grad_norm <= 1e-10,
            };
            let at_end = done || t >= config.max_iters;
            if t % config.record_every == 0 || at_end {
                records.push(rec);
                kept.push(x.clone());
            }
            if done {
                converged = true;
            }
            if at_end {
                break;
            }
            let next = &x - grad * eta;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    iterations: t,
                    last_finite: x.as_slice().to_vec(),
                });
            }
            x = next;
            t += 1;
        }
        Ok(PrTrajectory {
            records,
            iterates_kept: kept,
            final_iterate: x,
            iterations: t,
            converged,
            eta,
        })
    }

    fn record(
        &self,
        iter: usize,
        x: &DVector<f64>,
        grad: &DVector<f64>,
        truth: Option<&DVector<f64>>,
    ) -> Result<PrRecord> {
        let loss = self.loss(x)?;
        let mut rec = PrRecord {
            iter,
            loss,
            grad_norm: grad.norm(),
            dist: f64::NAN,
            rel_dist: f64::NAN,
            incoherence_raw: f64::NAN,
            incoherence_diff: f64::NAN,
        };
        if let Some(xs) = truth {
            let (dist, sign) = signed_dist(x, xs);
            let scale = ((self.inst.n as f64).ln().sqrt()) * xs.norm();
            let ax = &self.inst.designs * x;
            let diff = x - xs * sign;
            let ad = &self.inst.designs * diff;
            rec.dist = dist;
            rec.rel_dist = dist / xs.norm();
            rec.incoherence_raw = ax.amax() / scale;
            rec.incoherence_diff = ad.amax() / scale;
        }
        Ok(rec)
    }
}

fn signed_dist(x: &DVector<f64>, xs: &DVector<f64>) -> (f64, f64) {
    let minus = (x - xs).norm();
    let plus = (x + xs).norm();
    if minus <= plus {
        (minus, 1.0)
    } else {
        (plus, -1.0)
    }
}

/// `min(||x - x*||, ||x + x*||)`.
pub fn pr_dist(x: &DVector<f64>, xstar: &DVector<f64>) -> f64 {
    signed_dist(x, xstar).0
}

pub fn pr_loss(inst: &PhaseRetrievalInstance, x: &DVector<f64>) -> Result<f64> {
    PrObjective::new(inst, None)?.loss(x)
}

pub fn pr_gradient(inst: &PhaseRetrievalInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    PrObjective::new(inst, None)?.gradient(x)
}

/// `v^T grad^2 f(x) v`, never forming the Hessian.
pub fn pr_hessian_quadform(
    inst: &PhaseRetrievalInstance,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    PrObjective::new(inst, None)?.hessian_quadform(x, v)
}

/// `grad^2 f(x) v`.
pub fn pr_hessian_apply(
    inst: &PhaseRetrievalInstance,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    PrObjective::new(inst, None)?.hessian_apply(x, v)
}

pub fn pr_data_matrix(inst: &PhaseRetrievalInstance) -> DMatrix<f64> {
    PrObjective { inst, skip: None }.data_matrix()
}

pub fn pr_spectral_init(inst: &PhaseRetrievalInstance) -> Result<DVector<f64>> {
    PrObjective::new(inst, None)?.spectral_init()
}

/// Spectral initialization followed by gradient descent.
pub fn pr_run(inst: &PhaseRetrievalInstance, config: &PrConfig) -> Result<PrTrajectory> {
    let obj = PrObjective::new(inst, None)?;
    let x0 = obj.spectral_init()?;
    obj.run_from(config, x0)
}

/// Gradient descent from a caller-supplied starting point.
pub fn pr_run_from(
    inst: &PhaseRetrievalInstance,
    config: &PrConfig,
    x0: DVector<f64>,
) -> Result<PrTrajectory> {
    PrObjective::new(inst, None)?.run_from(config, x0)
}

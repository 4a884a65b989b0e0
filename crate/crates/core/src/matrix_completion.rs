//! Vanilla gradient descent for PSD low-rank matrix completion.
//!
//! Loss `f(X) = (1/4p) sum_{(j,k) in Omega} (e_j^T X X^T e_k - Y_jk)^2` over
//! ordered pairs. All sums run over the sampled entries only, so one
//! iteration costs `O(|Omega| r)`. Internally the factor is held transposed
//! (`r x n`) so that every row `X_j` is a contiguous slice.

use std::ops::AddAssign;

use nalgebra::DMatrix;

use crate::ensembles::{MatrixCompletionInstance, SampleMask};
use crate::error::{Error, Result};
use crate::numlin::{procrustes_align, spectral_norm, top_eigs_sym, two_to_inf_norm};

/// Step modification for the projected and penalized comparison runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    None,
    /// Clip every row of the new iterate to `l2` norm at most the radius.
    /// `None` means `2 max_j ||e_j^T X0||`.
    Projected {
        radius: Option<f64>,
    },
    /// Adds the gradient of `lambda sum_j max(||e_j^T X||^2 - alpha, 0)^2`.
    /// `alpha = None` means `2 ||X0||_{2,inf}^2`.
    Regularized {
        lambda: f64,
        alpha: Option<f64>,
    },
}

/// Which error decides convergence when the truth is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Aligned factor error `||X H - X*||_F / ||X*||_F`.
    FactorFro,
    /// `||X X^T - M*||_F / ||M*||_F`.
    MatrixFro,
    /// Frobenius, spectral and entrywise errors of `X X^T` all below tolerance.
    AllMatrixNorms,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub tol_rel: f64,
    pub record_every: usize,
    pub stop_rule: StopRule,
    pub baseline: Baseline,
    /// Store the iterate at every record (needed by the leave-one-out analysis).
    pub keep_iterates: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            eta: 0.2,
            max_iters: 1000,
            tol_rel: 1e-5,
            record_every: 1,
            stop_rule: StopRule::FactorFro,
            baseline: Baseline::None,
            keep_iterates: false,
        }
    }
}

impl McConfig {
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
        match self.baseline {
            Baseline::Projected { radius: Some(r) } if !(r > 0.0) => {
                Err(Error::invalid("projection radius must be > 0"))
            }
            Baseline::Regularized { lambda, alpha }
                if !(lambda >= 0.0) || alpha.is_some_and(|a| !(a >= 0.0)) =>
            {
                Err(Error::invalid("penalty parameters must be >= 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Errors of an estimate, all relative. Factor errors use the Procrustes
/// rotation `H = sgn(X^T X*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McErrors {
    pub err_fro: f64,
    pub err_op: f64,
    pub err_2inf: f64,
    /// `||X X^T - M*||_inf / ||M*||_inf` (largest entry).
    pub err_entrywise: f64,
    pub mat_fro: f64,
    pub mat_op: f64,
}

impl McErrors {
    pub const NAN: McErrors = McErrors {
        err_fro: f64::NAN,
        err_op: f64::NAN,
        err_2inf: f64::NAN,
        err_entrywise: f64::NAN,
        mat_fro: f64::NAN,
        mat_op: f64::NAN,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub errors: McErrors,
}

#[derive(Debug, Clone)]
pub struct McTrajectory {
    pub records: Vec<McRecord>,
    /// Iterates at the records when `keep_iterates` is set.
    pub iterates_kept: Vec<DMatrix<f64>>,
    pub initial: DMatrix<f64>,
    pub final_iterate: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl McTrajectory {
    pub fn last(&self) -> &McRecord {
        self.records
            .last()
            .expect("trajectory always holds the initial record")
    }
}

// ---------------------------------------------------------------------------
// projections

fn check_square(inst_n: usize, m: &DMatrix<f64>) -> Result<()> {
    if m.shape() != (inst_n, inst_n) {
        return Err(Error::invalid(format!(
            "expected {inst_n} x {inst_n} matrix, got {:?}",
            m.shape()
        )));
    }
    Ok(())
}

fn check_index(n: usize, l: usize) -> Result<()> {
    if l >= n {
        return Err(Error::invalid(format!("index {l} out of range (n = {n})")));
    }
    Ok(())
}

/// `P_Omega(M)`: keeps the sampled entries.
pub fn project_omega(mask: &SampleMask, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = mask.dim();
    check_square(n, m)?;
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for &k in mask.row(j) {
            out[(j, k)] = m[(j, k)];
        }
    }
    Ok(out)
}

/// `P_{Omega_l}(M)`: sampled entries on row or column `l`.
pub fn project_omega_l(mask: &SampleMask, m: &DMatrix<f64>, l: usize) -> Result<DMatrix<f64>> {
    let n = mask.dim();
    check_square(n, m)?;
    check_index(n, l)?;
    let mut out = DMatrix::zeros(n, n);
    for &k in mask.row(l) {
        out[(l, k)] = m[(l, k)];
        out[(k, l)] = m[(k, l)];
    }
    Ok(out)
}

/// `P_{Omega^{-l}}(M)`: sampled entries off row and column `l`.
pub fn project_omega_minus_l(
    mask: &SampleMask,
    m: &DMatrix<f64>,
    l: usize,
) -> Result<DMatrix<f64>> {
    let n = mask.dim();
    check_square(n, m)?;
    check_index(n, l)?;
    let mut out = DMatrix::zeros(n, n);
    for j in (0..n).filter(|&j| j != l) {
        for &k in mask.row(j).iter().filter(|&&k| k != l) {
            out[(j, k)] = m[(j, k)];
        }
    }
    Ok(out)
}

/// `P_l(M)`: all entries on row or column `l`.
pub fn project_l(m: &DMatrix<f64>, l: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    check_square(n, m)?;
    check_index(n, l)?;
    let mut out = DMatrix::zeros(n, n);
    out.set_row(l, &m.row(l));
    out.set_column(l, &m.column(l));
    Ok(out)
}

// ---------------------------------------------------------------------------
// objective

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// The loss seen by one run. With `leave_out = Some(l)`, row and column `l`
/// are removed from the sampled sum and replaced by the fully observed,
/// noiseless line `P_l(X X^T - M*)` with unit weight.
#[derive(Debug, Clone, Copy)]
pub(crate) struct McObjective<'a> {
    inst: &'a MatrixCompletionInstance,
    leave_out: Option<usize>,
}

impl<'a> McObjective<'a> {
    pub(crate) fn new(
        inst: &'a MatrixCompletionInstance,
        leave_out: Option<usize>,
    ) -> Result<Self> {
        if let Some(l) = leave_out {
            check_index(inst.n, l)?;
            inst.truth_matrix()?;
        }
        Ok(Self { inst, leave_out })
    }

    fn check_factor(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.shape() != (self.inst.n, self.inst.r) {
            return Err(Error::invalid(format!(
                "factor must be {} x {}, got {:?}",
                self.inst.n,
                self.inst.r,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Visits every term `(k, weight, target)` of row `j`; each ordered pair
    /// of the loss is visited exactly once over all rows.
    fn for_each_term(&self, j: usize, mut f: impl FnMut(usize, f64, f64)) {
        let inv_p = 1.0 / self.inst.p;
        match self.leave_out {
            None => {
                for &k in self.inst.mask.row(j) {
                    f(k, inv_p, self.inst.observed[(j, k)]);
                }
            }
            Some(l) => {
                let mstar = self.inst.truth_matrix.as_ref().expect("checked in new");
                if j == l {
                    for k in 0..self.inst.n {
                        f(k, 1.0, mstar[(l, k)]);
                    }
                } else {
                    for &k in self.inst.mask.row(j).iter().filter(|&&k| k != l) {
                        f(k, inv_p, self.inst.observed[(j, k)]);
                    }
                    f(l, 1.0, mstar[(j, l)]);
                }
            }
        }
    }

    /// Loss and gradient on the transposed factor.
    fn loss_grad_t(&self, xt: &DMatrix<f64>, want_grad: bool) -> (f64, DMatrix<f64>) {
        let (r, n) = xt.shape();
        let mut gt = DMatrix::zeros(if want_grad { r } else { 0 }, if want_grad { n } else { 0 });
        let mut loss = 0.0;
        for j in 0..n {
            let xj = xt.column(j);
            let xj = xj.as_slice();
            let mut gj = vec![0.0; if want_grad { r } else { 0 }];
            self.for_each_term(j, |k, w, target| {
                let xk = xt.column(k);
                let d = dot(xj, xk.as_slice()) - target;
                loss += w * d * d;
                if want_grad {
                    axpy(w * d, xk.as_slice(), &mut gj);
                }
            });
            if want_grad {
                gt.column_mut(j).copy_from_slice(&gj);
            }
        }
        (loss / 4.0, gt)
    }

    pub(crate) fn loss(&self, x: &DMatrix<f64>) -> Result<f64> {
        self.check_factor(x)?;
        Ok(self.loss_grad_t(&x.transpose(), false).0)
    }

    pub(crate) fn gradient(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_factor(x)?;
        Ok(self.loss_grad_t(&x.transpose(), true).1.transpose())
    }

    /// `M0 = P_Omega(Y) / p`, or `P_{Omega^{-l}}(Y) / p + P_l(M*)`.
    pub(crate) fn init_matrix(&self) -> DMatrix<f64> {
        let n = self.inst.n;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            self.for_each_term(j, |k, w, target| m[(j, k)] = w * target);
        }
        m
    }

    pub(crate) fn spectral_init(&self) -> Result<DMatrix<f64>> {
        let r = self.inst.r;
        let eig = top_eigs_sym(&self.init_matrix(), r)?;
        if let Some(&lam) = eig.values.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::numeric(
                0,
                format!(
                    "spectral initialization needs {r} positive eigenvalues, found {lam} among {:?}",
                    eig.values
                ),
            ));
        }
        let mut x = eig.vectors;
        for (c, &v) in eig.values.iter().enumerate() {
            x.column_mut(c).scale_mut(v.sqrt());
        }
        Ok(x)
    }

    pub(crate) fn run_from(&self, config: &McConfig, x0: DMatrix<f64>) -> Result<McTrajectory> {
        config.validate()?;
        self.check_factor(&x0)?;
        let truth = Truth::new(self.inst);
        let eta = config.eta;
        let (radius, reg) = match config.baseline {
            Baseline::None => (None, None),
            Baseline::Projected { radius } => (
                Some(radius.unwrap_or_else(|| 2.0 * two_to_inf_norm(&x0))),
                None,
            ),
            Baseline::Regularized { lambda, alpha } => {
                let alpha = alpha.unwrap_or_else(|| 2.0 * two_to_inf_norm(&x0).powi(2));
                (None, Some((lambda, alpha)))
            }
        };

        let mut xt = x0.transpose();
        let mut records = Vec::new();
        let mut kept = Vec::new();
        let mut t = 0;
        let converged = loop {
            let (loss, mut gt) = self.loss_grad_t(&xt, true);
            if let Some((lambda, alpha)) = reg {
                for j in 0..xt.ncols() {
                    let excess = xt.column(j).norm_squared() - alpha;
                    if excess > 0.0 {
                        let scaled = xt.column(j) * (4.0 * lambda * excess);
                        gt.column_mut(j).add_assign(&scaled);
                    }
                }
            }
            let grad_norm = gt.norm();
            let done = match &truth {
                Some(tr) => tr.stop(&xt, config.stop_rule, config.tol_rel)?,
                None => grad_norm <= 1e-10,
            };
            let at_end = done || t >= config.max_iters;
            if t % config.record_every == 0 || at_end {
                let x = xt.transpose();
                let errors = match &truth {
                    Some(tr) => tr.errors(&x)?,
                    None => McErrors::NAN,
                };
                records.push(McRecord {
                    iter: t,
                    loss,
                    grad_norm,
                    errors,
                });
                if config.keep_iterates {
                    kept.push(x);
                }
            }
            if at_end {
                break done;
            }
            let mut next = &xt - gt * eta;
            if let Some(radius) = radius {
                for mut col in next.column_iter_mut() {
                    let norm = col.norm();
                    if norm > radius {
                        col.scale_mut(radius / norm);
                    }
                }
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    iterations: t,
                    last_finite: xt.transpose().as_slice().to_vec(),
                });
            }
            xt = next;
            t += 1;
        };
        Ok(McTrajectory {
            records,
            iterates_kept: kept,
            initial: x0,
            final_iterate: xt.transpose(),
            iterations: t,
            converged,
        })
    }
}

/// Cached ground-truth quantities for the error metrics.
struct Truth<'a> {
    xstar: &'a DMatrix<f64>,
    mstar: &'a DMatrix<f64>,
    xstar_fro: f64,
    xstar_op: f64,
    xstar_2inf: f64,
    mstar_fro: f64,
    mstar_op: f64,
    mstar_inf: f64,
}

impl<'a> Truth<'a> {
    fn new(inst: &'a MatrixCompletionInstance) -> Option<Self> {
        let xstar = inst.truth_factor.as_ref()?;
        let mstar = inst.truth_matrix.as_ref()?;
        Some(Self {
            xstar,
            mstar,
            xstar_fro: xstar.norm(),
            xstar_op: spectral_norm(xstar),
            xstar_2inf: two_to_inf_norm(xstar),
            mstar_fro: mstar.norm(),
            mstar_op: spectral_norm(xstar).powi(2),
            mstar_inf: mstar.amax(),
        })
    }

    /// Frobenius and spectral norms of `X X^T - X* X*^T` through a thin QR of
    /// `[X, X*]`, in `O(n r^2)`.
    fn matrix_fro_op(&self, x: &DMatrix<f64>) -> (f64, f64) {
        let (n, r) = x.shape();
        let mut w = DMatrix::zeros(n, 2 * r);
        w.columns_mut(0, r).copy_from(x);
        w.columns_mut(r, r).copy_from(self.xstar);
        let rf = w.qr().r();
        let mut rj = rf.clone();
        rj.columns_mut(r, r).neg_mut();
        let core = &rj * rf.transpose();
        let core = (&core + core.transpose()) * 0.5;
        let op = core.symmetric_eigenvalues().amax();
        (core.norm(), op)
    }

    fn entrywise(&self, xt: &DMatrix<f64>) -> f64 {
        let n = xt.ncols();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let xj = xt.column(j);
            for k in j..n {
                let d = dot(xj.as_slice(), xt.column(k).as_slice()) - self.mstar[(j, k)];
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    fn stop(&self, xt: &DMatrix<f64>, rule: StopRule, tol: f64) -> Result<bool> {
        Ok(match rule {
            StopRule::FactorFro => {
                let x = xt.transpose();
                procrustes_align(&x, self.xstar)?.residual <= tol * self.xstar_fro
            }
            StopRule::MatrixFro => self.matrix_fro_op(&xt.transpose()).0 <= tol * self.mstar_fro,
            StopRule::AllMatrixNorms => {
                let (fro, op) = self.matrix_fro_op(&xt.transpose());
                fro <= tol * self.mstar_fro
                    && op <= tol * self.mstar_op
                    && self.entrywise(xt) <= tol * self.mstar_inf
            }
        })
    }

    fn errors(&self, x: &DMatrix<f64>) -> Result<McErrors> {
        let pr = procrustes_align(x, self.xstar)?;
        let diff = x * &pr.rotation - self.xstar;
        let (fro, op) = self.matrix_fro_op(x);
        Ok(McErrors {
            err_fro: pr.residual / self.xstar_fro,
            err_op: spectral_norm(&diff) / self.xstar_op,
            err_2inf: two_to_inf_norm(&diff) / self.xstar_2inf,
            err_entrywise: self.entrywise(&x.transpose()) / self.mstar_inf,
            mat_fro: fro / self.mstar_fro,
            mat_op: op / self.mstar_op,
        })
    }
}

// ---------------------------------------------------------------------------
// public entry points

pub fn mc_loss(inst: &MatrixCompletionInstance, x: &DMatrix<f64>) -> Result<f64> {
    McObjective::new(inst, None)?.loss(x)
}

/// `(1/p) P_Omega(X X^T - Y) X`.
pub fn mc_gradient(inst: &MatrixCompletionInstance, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    McObjective::new(inst, None)?.gradient(x)
}

fn clean_terms(
    inst: &MatrixCompletionInstance,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
    mut f: impl FnMut(usize, usize, f64, f64),
) -> Result<()> {
    let mstar = inst.truth_matrix()?;
    let shape = (inst.n, inst.r);
    if x.shape() != shape || v.shape() != shape {
        return Err(Error::invalid(format!(
            "factor and direction must be {} x {}",
            inst.n, inst.r
        )));
    }
    let xt = x.transpose();
    let vt = v.transpose();
    for j in 0..inst.n {
        for &k in inst.mask.row(j) {
            let s = dot(vt.column(j).as_slice(), xt.column(k).as_slice())
                + dot(xt.column(j).as_slice(), vt.column(k).as_slice());
            let d = dot(xt.column(j).as_slice(), xt.column(k).as_slice()) - mstar[(j, k)];
            f(j, k, s, d);
        }
    }
    Ok(())
}

/// `(1/2p) ||P_Omega(V X^T + X V^T)||_F^2 + (1/p) <P_Omega(X X^T - M*), V V^T>`.
pub fn mc_clean_hessian_quadform(
    inst: &MatrixCompletionInstance,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<f64> {
    let mut acc = 0.0;
    let vt = v.transpose();
    clean_terms(inst, x, v, |j, k, s, d| {
        acc += 0.5 * s * s + d * dot(vt.column(j).as_slice(), vt.column(k).as_slice());
    })?;
    Ok(acc / inst.p)
}

/// `(1/p) [P_Omega(V X^T + X V^T) X + P_Omega(X X^T - M*) V]`.
pub fn mc_clean_hessian_apply(
    inst: &MatrixCompletionInstance,
    x: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(inst.r, inst.n);
    let xt = x.transpose();
    let vt = v.transpose();
    clean_terms(inst, x, v, |j, k, s, d| {
        let mut col = out.column_mut(j);
        col.axpy(s, &xt.column(k), 1.0);
        col.axpy(d, &vt.column(k), 1.0);
    })?;
    Ok(out.transpose() / inst.p)
}

/// Power-iteration estimate of the clean Hessian operator norm at `x`,
/// started from `start`.
pub fn mc_clean_hessian_norm(
    inst: &MatrixCompletionInstance,
    x: &DMatrix<f64>,
    start: &DMatrix<f64>,
    iters: usize,
) -> Result<f64> {
    let mut v = start.clone();
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(Error::invalid("power iteration needs a nonzero start"));
    }
    v /= norm;
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let hv = mc_clean_hessian_apply(inst, x, &v)?;
        est = hv.norm();
        if est == 0.0 {
            break;
        }
        v = hv / est;
    }
    Ok(est)
}

/// `X0 = U0 (Sigma0)^{1/2}` from the rank-`r` eigendecomposition of `P_Omega(Y) / p`.
pub fn mc_spectral_init(inst: &MatrixCompletionInstance) -> Result<DMatrix<f64>> {
    McObjective::new(inst, None)?.spectral_init()
}

/// Spectral initialization followed by gradient descent.
pub fn mc_run(inst: &MatrixCompletionInstance, config: &McConfig) -> Result<McTrajectory> {
    let obj = McObjective::new(inst, None)?;
    let x0 = obj.spectral_init()?;
    obj.run_from(config, x0)
}

pub fn mc_run_from(
    inst: &MatrixCompletionInstance,
    config: &McConfig,
    x0: DMatrix<f64>,
) -> Result<McTrajectory> {
    McObjective::new(inst, None)?.run_from(config, x0)
}

pub fn mc_error_report(inst: &MatrixCompletionInstance, x: &DMatrix<f64>) -> Result<McErrors> {
    if x.shape() != (inst.n, inst.r) {
        return Err(Error::invalid("factor shape does not match the instance"));
    }
    let truth = Truth::new(inst).ok_or(Error::MissingTruth("matrix completion factor"))?;
    truth.errors(x)
}

/// `mu = n ||U||_{2,inf}^2 / r` for the column space of `u` (orthonormalised
/// first, so the factor `X*` may be passed directly).
pub fn mc_incoherence_param(u: &DMatrix<f64>) -> Result<f64> {
    let (n, r) = u.shape();
    if r == 0 || r > n {
        return Err(Error::invalid("need an n x r input with 1 <= r <= n"));
    }
    let q = u.clone().qr().q();
    Ok(n as f64 * two_to_inf_norm(&q).powi(2) / r as f64)
}

/// Signal-to-noise ratio `sum_Omega M*_jk^2 / (|Omega| sigma^2)`.
pub fn mc_snr(inst: &MatrixCompletionInstance) -> Result<f64> {
    let mstar = inst.truth_matrix()?;
    let mut acc = 0.0;
    for j in 0..inst.n {
        for &k in inst.mask.row(j) {
            acc += mstar[(j, k)].powi(2);
        }
    }
    Ok(acc / (inst.mask.len() as f64 * inst.noise_level.powi(2)))
}

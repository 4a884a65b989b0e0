//! Scaled Wirtinger gradient descent for blind deconvolution.
//!
//! Loss `f(h, x) = sum_j |b_j^H h x^H a_j - y_j|^2`. Gradients are Wirtinger
//! derivatives with respect to the conjugate variables, so a real
//! perturbation `(dh, dx)` changes the loss by
//! `2 Re(<grad_h, dh> + <grad_x, dx>)` to first order.

use nalgebra::DVector;

use crate::ensembles::BlindDeconvInstance;
use crate::error::{Error, Result};
use crate::numlin::{scalar_align, top_singular_triplet};
use crate::C64;

/// A point `z = (h, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdState {
    pub h: DVector<C64>,
    pub x: DVector<C64>,
}

impl BdState {
    pub fn new(h: DVector<C64>, x: DVector<C64>) -> Result<Self> {
        Error::check_dim(h.len(), x.len())?;
        Ok(Self { h, x })
    }

    /// `(h / conj(alpha), alpha x)`, the representative with the same `h x^H`.
    pub fn rescaled(&self, alpha: C64) -> Self {
        Self {
            h: &self.h * alpha.conj().inv(),
            x: &self.x * alpha,
        }
    }

    fn is_finite(&self) -> bool {
        self.h
            .iter()
            .chain(self.x.iter())
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn flatten(&self) -> Vec<f64> {
        self.h
            .iter()
            .chain(self.x.iter())
            .flat_map(|v| [v.re, v.im])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdConfig {
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once `||h x^H - h* x*^H||_F / ||h* x*^H||_F <= tol_rel`.
    pub tol_rel: f64,
    pub record_every: usize,
}

impl Default for BdConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            max_iters: 1000,
            tol_rel: 1e-5,
            record_every: 1,
        }
    }
}

impl BdConfig {
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
        Ok(())
    }
}

/// Metrics at one recorded iteration; truth-dependent fields are NaN
/// without ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub dist: f64,
    pub rel_fro: f64,
    /// `max_j |a_j^H (alpha x - x*)|`
    pub inc_a: f64,
    /// `max_j |b_j^H h / conj(alpha)|`
    pub inc_b: f64,
    pub alpha: C64,
}

#[derive(Debug, Clone)]
pub struct BdTrajectory {
    pub records: Vec<BdRecord>,
    /// Iterates at the recorded iterations.
    pub iterates_kept: Vec<BdState>,
    pub final_state: BdState,
    pub iterations: usize,
    pub converged: bool,
}

impl BdTrajectory {
    pub fn last(&self) -> &BdRecord {
        self.records
            .last()
            .expect("trajectory always holds the initial record")
    }
}

/// Top half `(w_h, w_x)` of a Hessian-vector product; the bottom half of the
/// full `4K` vector is its conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct BdProbe {
    pub dh: DVector<C64>,
    pub dx: DVector<C64>,
}

impl BdProbe {
    /// `||u||^2` of the full structured `4K` probe.
    pub fn full_norm_squared(&self) -> f64 {
        2.0 * (self.dh.norm_squared() + self.dx.norm_squared())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BdObjective<'a> {
    inst: &'a BlindDeconvInstance,
    skip: Option<usize>,
}

struct Products {
    bh: DVector<C64>,
    ax: DVector<C64>,
    /// `b_j^H h x^H a_j - y_j`, zero at the skipped sample.
    resid: DVector<C64>,
}

impl<'a> BdObjective<'a> {
    pub(crate) fn new(inst: &'a BlindDeconvInstance, skip: Option<usize>) -> Result<Self> {
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

    fn check(&self, h: &DVector<C64>, x: &DVector<C64>) -> Result<()> {
        Error::check_dim(self.inst.k, h.len())?;
        Error::check_dim(self.inst.k, x.len())
    }

    fn products(&self, h: &DVector<C64>, x: &DVector<C64>) -> Products {
        let bh = &self.inst.b * h;
        let ax = &self.inst.a * x;
        let mut resid = DVector::from_fn(self.inst.m, |j, _| {
            bh[j] * ax[j].conj() - self.inst.measurements[j]
        });
        if let Some(l) = self.skip {
            resid[l] = C64::new(0.0, 0.0);
        }
        Products { bh, ax, resid }
    }

    pub(crate) fn loss(&self, h: &DVector<C64>, x: &DVector<C64>) -> Result<f64> {
        self.check(h, x)?;
        Ok(self.products(h, x).resid.norm_squared())
    }

    fn gradients_from(&self, p: &Products) -> (DVector<C64>, DVector<C64>) {
        let gh = self.inst.b.ad_mul(&p.resid.component_mul(&p.ax));
        let gx = self
            .inst
            .a
            .ad_mul(&p.resid.map(|r| r.conj()).component_mul(&p.bh));
        (gh, gx)
    }

    pub(crate) fn gradients(
        &self,
        h: &DVector<C64>,
        x: &DVector<C64>,
    ) -> Result<(DVector<C64>, DVector<C64>)> {
        self.check(h, x)?;
        Ok(self.gradients_from(&self.products(h, x)))
    }

    pub(crate) fn hessian_apply(&self, z: &BdState, v: &BdProbe) -> Result<BdProbe> {
        self.check(&z.h, &z.x)?;
        self.check(&v.dh, &v.dx)?;
        let p = self.products(&z.h, &z.x);
        let bdh = &self.inst.b * &v.dh;
        let adx = &self.inst.a * &v.dx;
        let mut both = p.ax.component_mul(&p.bh);
        if let Some(l) = self.skip {
            both[l] = C64::new(0.0, 0.0);
        }
        let mut ax_sq = p.ax.map(|c| C64::new(c.norm_sqr(), 0.0));
        let mut bh_sq = p.bh.map(|c| C64::new(c.norm_sqr(), 0.0));
        if let Some(l) = self.skip {
            ax_sq[l] = C64::new(0.0, 0.0);
            bh_sq[l] = C64::new(0.0, 0.0);
        }
        // A11 dh + A12 dx + B12 conj(dx)
        let wh_coef = ax_sq.component_mul(&bdh)
            + p.resid.component_mul(&adx)
            + both.component_mul(&adx.map(|c| c.conj()));
        // A21 dh + A22 dx + B21 conj(dh)
        let wx_coef = p.resid.map(|r| r.conj()).component_mul(&bdh)
            + bh_sq.component_mul(&adx)
            + both.component_mul(&bdh.map(|c| c.conj()));
        Ok(BdProbe {
            dh: self.inst.b.ad_mul(&wh_coef),
            dx: self.inst.a.ad_mul(&wx_coef),
        })
    }

    /// `M = sum_j y_j b_j a_j^H` without the skipped sample, scaled to the
    /// leading singular pair.
    pub(crate) fn spectral_init(&self) -> Result<BdState> {
        let mut y = self.inst.measurements.clone();
        if let Some(l) = self.skip {
            y[l] = C64::new(0.0, 0.0);
        }
        let mut weighted = self.inst.a.clone();
        for (j, mut row) in weighted.row_iter_mut().enumerate() {
            row *= y[j];
        }
        let m = self.inst.b.ad_mul(&weighted);
        let svd = top_singular_triplet(&m)?;
        if !(svd.sigma1 > 0.0) {
            return Err(Error::numeric(0, "spectral matrix is zero"));
        }
        let s = svd.sigma1.sqrt();
        BdState::new(svd.left * C64::new(s, 0.0), svd.right * C64::new(s, 0.0))
    }

    pub(crate) fn run_from(&self, config: &BdConfig, z0: BdState) -> Result<BdTrajectory> {
        config.validate()?;
        self.check(&z0.h, &z0.x)?;
        let truth = self.inst.truth.as_ref();
        let truth_fro = truth.map(|(h, x)| h.norm() * x.norm());
        let mut z = z0;
        let mut records = Vec::new();
        let mut kept = Vec::new();
        let mut t = 0;
        let converged = loop {
            let hn = z.h.norm_squared();
            let xn = z.x.norm_squared();
            if !(hn.sqrt() >= 1e-12 && xn.sqrt() >= 1e-12) {
                return Err(Error::numeric(
                    t,
                    "an iterate block vanished; the scaled step is undefined",
                ));
            }
            let p = self.products(&z.h, &z.x);
            let (gh, gx) = self.gradients_from(&p);
            let grad_norm = (gh.norm_squared() + gx.norm_squared()).sqrt();
            let rel_fro = match (truth, truth_fro) {
                (Some((hs, xs)), Some(f)) => outer_diff_fro(&z, hs, xs) / f,
                _ => f64::NAN,
            };
            let done = match truth {
                Some(_) => rel_fro <= config.tol_rel,
                None => grad_norm <= 1e-10,
            };
            let at_end = done || t >= config.max_iters;
            if t % config.record_every == 0 || at_end {
                let mut rec = BdRecord {
                    iter: t,
                    loss: p.resid.norm_squared(),
                    grad_norm,
                    dist: f64::NAN,
                    rel_fro,
                    inc_a: f64::NAN,
                    inc_b: f64::NAN,
                    alpha: C64::new(f64::NAN, f64::NAN),
                };
                if let Some((hs, xs)) = truth {
                    let sol = scalar_align(&z.h, &z.x, hs, xs)?;
                    let aligned = z.rescaled(sol.alpha);
                    rec.dist = sol.objective.sqrt();
                    rec.alpha = sol.alpha;
                    rec.inc_a = max_modulus(&(&self.inst.a * (&aligned.x - xs)));
                    rec.inc_b = max_modulus(&(&self.inst.b * &aligned.h));
                }
                records.push(rec);
                kept.push(z.clone());
            }
            if at_end {
                break done;
            }
            let next = BdState {
                h: &z.h - gh * C64::new(config.eta / xn, 0.0),
                x: &z.x - gx * C64::new(config.eta / hn, 0.0),
            };
            if !next.is_finite() {
                return Err(Error::Diverged {
                    iterations: t,
                    last_finite: z.flatten(),
                });
            }
            z = next;
            t += 1;
        };
        Ok(BdTrajectory {
            records,
            iterates_kept: kept,
            final_state: z,
            iterations: t,
            converged,
        })
    }
}

pub(crate) fn max_modulus(v: &DVector<C64>) -> f64 {
    v.iter().fold(0.0, |acc, c| acc.max(c.norm()))
}

/// `||h x^H - h* x*^H||_F`, formed entrywise to avoid cancellation.
fn outer_diff_fro(z: &BdState, hs: &DVector<C64>, xs: &DVector<C64>) -> f64 {
    let mut acc = 0.0;
    for (hi, hsi) in z.h.iter().zip(hs.iter()) {
        for (xk, xsk) in z.x.iter().zip(xs.iter()) {
            acc += (hi * xk.conj() - hsi * xsk.conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn bd_loss(inst: &BlindDeconvInstance, h: &DVector<C64>, x: &DVector<C64>) -> Result<f64> {
    BdObjective::new(inst, None)?.loss(h, x)
}

/// `(grad_h f, grad_x f)`.
pub fn bd_gradients(
    inst: &BlindDeconvInstance,
    h: &DVector<C64>,
    x: &DVector<C64>,
) -> Result<(DVector<C64>, DVector<C64>)> {
    BdObjective::new(inst, None)?.gradients(h, x)
}

/// Wirtinger Hessian applied to the structured probe `(dh, dx, conj dh, conj dx)`.
pub fn bd_hessian_apply(inst: &BlindDeconvInstance, z: &BdState, v: &BdProbe) -> Result<BdProbe> {
    BdObjective::new(inst, None)?.hessian_apply(z, v)
}

/// `u^H H u` for `u = (dh, dx, conj dh, conj dx)`; equals the second
/// derivative of `f(z + t v)` at `t = 0`.
pub fn bd_hessian_quadform(inst: &BlindDeconvInstance, z: &BdState, v: &BdProbe) -> Result<f64> {
    let w = bd_hessian_apply(inst, z, v)?;
    Ok(2.0 * (v.dh.dotc(&w.dh) + v.dx.dotc(&w.dx)).re)
}

pub fn bd_spectral_init(inst: &BlindDeconvInstance) -> Result<BdState> {
    BdObjective::new(inst, None)?.spectral_init()
}

pub fn bd_run(inst: &BlindDeconvInstance, config: &BdConfig) -> Result<BdTrajectory> {
    let obj = BdObjective::new(inst, None)?;
    let z0 = obj.spectral_init()?;
    obj.run_from(config, z0)
}

pub fn bd_run_from(
    inst: &BlindDeconvInstance,
    config: &BdConfig,
    z0: BdState,
) -> Result<BdTrajectory> {
    BdObjective::new(inst, None)?.run_from(config, z0)
}

/// `min_alpha sqrt(||h / conj(alpha) - h*||^2 + ||alpha x - x*||^2)`.
pub fn bd_dist(
    h: &DVector<C64>,
    x: &DVector<C64>,
    hstar: &DVector<C64>,
    xstar: &DVector<C64>,
) -> Result<f64> {
    Ok(scalar_align(h, x, hstar, xstar)?.objective.sqrt())
}

/// `mu = sqrt(m) max_j |b_j^H h*| / ||h*||`.
pub fn bd_incoherence_param(inst: &BlindDeconvInstance) -> Result<f64> {
    let (h, _) = inst.truth()?;
    let norm = h.norm();
    if norm == 0.0 {
        return Err(Error::invalid("h* is zero"));
    }
    Ok((inst.m as f64).sqrt() * max_modulus(&(&inst.b * h)) / norm)
}

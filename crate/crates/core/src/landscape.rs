//! Empirical checks of restricted strong convexity and smoothness.
//!
//! Every suite draws one problem instance from stream 0 of the master seed
//! and all test points and probe directions from stream 1, then compares
//! Hessian quadratic forms (and power-iteration norm estimates) against a
//! lower and an upper bound. A suite passes when every probe lies within
//! its bounds.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::blind_deconvolution::{BdObjective, BdProbe, BdState};
use crate::ensembles::{
    complex_gaussian, gaussian, gen_blind_deconv, gen_matrix_completion_unit, gen_phase_retrieval,
    unit_complex, unit_real, RngSeed,
};
use crate::error::{Error, Result};
use crate::matrix_completion::{mc_clean_hessian_apply, mc_clean_hessian_quadform};
use crate::numlin::{
    procrustes_align, scalar_align, spectral_norm, two_to_inf_norm, AlignmentProblem,
};
use crate::phase_retrieval::PrObjective;
use crate::C64;

/// Extremes observed at one test point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub point: usize,
    /// Smallest normalised curvature over the probes.
    pub min_curvature: f64,
    /// Largest curvature or operator-norm estimate.
    pub max_curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeReport {
    pub suite: &'static str,
    pub master_seed: u64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub probes: usize,
    pub lower_failures: usize,
    pub upper_failures: usize,
    pub points: Vec<PointResult>,
}

impl LandscapeReport {
    fn new(suite: &'static str, master_seed: u64, lower_bound: f64, upper_bound: f64) -> Self {
        Self {
            suite,
            master_seed,
            lower_bound,
            upper_bound,
            probes: 0,
            lower_failures: 0,
            upper_failures: 0,
            points: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.lower_failures == 0 && self.upper_failures == 0 && self.probes > 0
    }

    pub fn min_curvature(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.min_curvature)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_curvature(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.max_curvature)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn lower(&mut self, value: f64) {
        self.probes += 1;
        if !(value >= self.lower_bound) {
            self.lower_failures += 1;
        }
    }

    fn upper(&mut self, value: f64) {
        self.probes += 1;
        if !(value <= self.upper_bound) {
            self.upper_failures += 1;
        }
    }
}

fn probe_rng(master_seed: u64) -> ChaCha8Rng {
    RngSeed::new(master_seed, 1).rng()
}

/// A uniform fraction of `scale` along a uniformly random direction.
fn random_offset(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    let frac: f64 = rng.random();
    unit_real(rng, n) * (scale * frac)
}

fn random_offset_c(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<C64> {
    let frac: f64 = rng.random();
    unit_complex(rng, n) * C64::new(scale * frac, 0.0)
}

const MAX_REDRAWS: usize = 1000;

// ---------------------------------------------------------------------------
// phase retrieval

#[derive(Debug, Clone, PartialEq)]
pub struct PrLandscapeConfig {
    pub n: usize,
    /// `None` means `round(10 n log n)`.
    pub m: Option<usize>,
    pub points: usize,
    pub probes: usize,
    /// Test points satisfy `||x - x*|| <= radius`.
    pub radius: f64,
    /// ... and `max_j |a_j^T (x - x*)| <= incoherence_cap sqrt(log n)`.
    pub incoherence_cap: f64,
    pub lower: f64,
    /// Upper bound is `upper_factor * log n`.
    pub upper_factor: f64,
    pub power_iters: usize,
}

impl Default for PrLandscapeConfig {
    fn default() -> Self {
        Self {
            n: 100,
            m: None,
            points: 50,
            probes: 200,
            radius: 0.1,
            incoherence_cap: 5.0,
            lower: 0.25,
            upper_factor: 50.0,
            power_iters: 50,
        }
    }
}

/// For unit `v`, `v^T grad^2 f(x) v` must lie in `[lower, upper_factor log n]`;
/// a power-iteration estimate of `||grad^2 f(x)||` is held to the same upper bound.
pub fn pr_landscape(cfg: &PrLandscapeConfig, master_seed: u64) -> Result<LandscapeReport> {
    let n = cfg.n;
    if n < 2 {
        return Err(Error::invalid("landscape check needs n >= 2"));
    }
    let log_n = (n as f64).ln();
    let m = cfg
        .m
        .unwrap_or_else(|| (10.0 * n as f64 * log_n).round() as usize);
    let inst = gen_phase_retrieval(n, m, RngSeed::new(master_seed, 0))?;
    let xstar = inst.truth()?.clone();
    let obj = PrObjective::new(&inst, None)?;
    let mut rng = probe_rng(master_seed);
    let mut report = LandscapeReport::new("pr", master_seed, cfg.lower, cfg.upper_factor * log_n);
    for point in 0..cfg.points {
        let mut x = None;
        for _ in 0..MAX_REDRAWS {
            let cand = &xstar + random_offset(&mut rng, n, cfg.radius);
            let inc = (&inst.designs * (&cand - &xstar)).amax();
            if inc <= cfg.incoherence_cap * log_n.sqrt() * xstar.norm() {
                x = Some(cand);
                break;
            }
        }
        let x = x.ok_or_else(|| Error::numeric(MAX_REDRAWS, "no incoherent test point found"))?;
        let mut res = PointResult {
            point,
            min_curvature: f64::INFINITY,
            max_curvature: f64::NEG_INFINITY,
        };
        let weights = obj.curvature_weights(&x)?;
        let mut probes = DMatrix::zeros(n, cfg.probes);
        for mut col in probes.column_iter_mut() {
            col.copy_from(&unit_real(&mut rng, n));
        }
        let av = &inst.designs * probes;
        for col in av.column_iter() {
            let q = weights.dot(&col.component_mul(&col));
            report.lower(q);
            report.upper(q);
            res.min_curvature = res.min_curvature.min(q);
            res.max_curvature = res.max_curvature.max(q);
        }
        let mut v = unit_real(&mut rng, n);
        let mut est = 0.0;
        for _ in 0..cfg.power_iters.max(1) {
            let hv = obj.hessian_apply(&x, &v)?;
            est = hv.norm();
            v = hv / est;
        }
        report.upper(est);
        res.max_curvature = res.max_curvature.max(est);
        report.points.push(res);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// matrix completion

#[derive(Debug, Clone, PartialEq)]
pub struct McLandscapeConfig {
    pub n: usize,
    pub r: usize,
    pub p: f64,
    pub constructions: usize,
    /// `||X - X*||_{2,inf} <= eps ||X*||_{2,inf}`, same for `Y`.
    pub eps: f64,
    /// `||Z - X*|| <= delta ||X*||`.
    pub delta: f64,
    /// Lower bound is `lower * sigma_min`.
    pub lower: f64,
    /// Upper bound is `upper * sigma_max`.
    pub upper: f64,
    pub power_iters: usize,
}

impl Default for McLandscapeConfig {
    fn default() -> Self {
        Self {
            n: 300,
            r: 3,
            p: 0.3,
            constructions: 20,
            eps: 0.05,
            delta: 0.1,
            lower: 0.25,
            upper: 3.0,
            power_iters: 100,
        }
    }
}

/// Random `n x r` perturbation whose rows have norm at most `bound`.
fn row_bounded(rng: &mut ChaCha8Rng, n: usize, r: usize, bound: f64) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, r);
    for j in 0..n {
        let row = random_offset(rng, r, bound);
        e.set_row(j, &row.transpose());
    }
    e
}

fn random_orthonormal(rng: &mut ChaCha8Rng, r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, r, |_, _| gaussian(rng)).qr().q()
}

/// For `X` in the `l2,inf` ball, `V = Y H_Y - Z` with `Y` in the same ball
/// (then rotated) and `Z` in a spectral ball: the clean quadratic form must be
/// at least `lower sigma_min ||V||_F^2`, and a power-iteration estimate of the
/// clean Hessian norm at most `upper sigma_max`.
pub fn mc_landscape(cfg: &McLandscapeConfig, master_seed: u64) -> Result<LandscapeReport> {
    let (n, r) = (cfg.n, cfg.r);
    let inst = gen_matrix_completion_unit(n, r, cfg.p, 0.0, RngSeed::new(master_seed, 0))?;
    let xstar = inst.truth_factor()?.clone();
    let (smax, smin) = inst.sigma_max_min().expect("generated with truth");
    let x2inf = two_to_inf_norm(&xstar);
    let xop = spectral_norm(&xstar);
    let mut rng = probe_rng(master_seed);
    let mut report = LandscapeReport::new("mc", master_seed, cfg.lower * smin, cfg.upper * smax);
    for point in 0..cfg.constructions {
        let x = &xstar + row_bounded(&mut rng, n, r, cfg.eps * x2inf);
        let y = (&xstar + row_bounded(&mut rng, n, r, cfg.eps * x2inf))
            * random_orthonormal(&mut rng, r);
        let g = DMatrix::from_fn(n, r, |_, _| gaussian(&mut rng));
        let frac: f64 = rng.random();
        let z = &xstar + &g * (cfg.delta * xop * frac / spectral_norm(&g));
        let hy = procrustes_align(&y, &z)?.rotation;
        let v = &y * hy - &z;
        let vv = v.norm_squared();
        let q = mc_clean_hessian_quadform(&inst, &x, &v)?;
        let lower = q / vv;
        report.lower(lower);

        let mut w = DMatrix::from_fn(n, r, |_, _| gaussian(&mut rng));
        w /= w.norm();
        let mut est = 0.0;
        for _ in 0..cfg.power_iters.max(1) {
            let hw = mc_clean_hessian_apply(&inst, &x, &w)?;
            est = hw.norm();
            w = hw / est;
        }
        report.upper(est);
        report.points.push(PointResult {
            point,
            min_curvature: lower,
            max_curvature: est,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// blind deconvolution

#[derive(Debug, Clone, PartialEq)]
pub struct BdLandscapeConfig {
    pub k: usize,
    pub m: usize,
    pub constructions: usize,
    /// Neighbourhood radius is `c_delta / log^2 m`.
    pub c_delta: f64,
    pub lower: f64,
    pub upper: f64,
    pub power_iters: usize,
}

impl Default for BdLandscapeConfig {
    fn default() -> Self {
        Self {
            k: 50,
            m: 500,
            constructions: 50,
            c_delta: 0.01,
            lower: 0.2,
            upper: 3.5,
            power_iters: 100,
        }
    }
}

fn within(v: &DVector<C64>, target: &DVector<C64>, radius: f64) -> bool {
    (v - target).norm() <= radius
}

/// `u^H (D H + H D) u >= lower ||u||^2` for `u` built from an aligned pair
/// near the truth and `D = diag(g1, g2, g1, g2)` with `|g - 1| <= delta`, and
/// `||H|| <= upper` by power iteration on the structured probes.
pub fn bd_landscape(cfg: &BdLandscapeConfig, master_seed: u64) -> Result<LandscapeReport> {
    let k = cfg.k;
    let inst = gen_blind_deconv(k, cfg.m, RngSeed::new(master_seed, 0))?;
    let (hs, xs) = inst.truth()?;
    let (hs, xs) = (hs.clone(), xs.clone());
    let obj = BdObjective::new(&inst, None)?;
    let delta = cfg.c_delta / (cfg.m as f64).ln().powi(2);
    let mut rng = probe_rng(master_seed);
    let mut report = LandscapeReport::new("bd", master_seed, cfg.lower, cfg.upper);
    for point in 0..cfg.constructions {
        let z = BdState::new(
            &hs + random_offset_c(&mut rng, k, delta),
            &xs + random_offset_c(&mut rng, k, delta),
        )?;
        let mut pair = None;
        for _ in 0..MAX_REDRAWS {
            let h1 = &hs + random_offset_c(&mut rng, k, 0.5 * delta);
            let x1 = &xs + random_offset_c(&mut rng, k, 0.5 * delta);
            let h2 = &hs + random_offset_c(&mut rng, k, 0.5 * delta);
            let x2 = &xs + random_offset_c(&mut rng, k, 0.5 * delta);
            let alpha = scalar_align(&h1, &x1, &h2, &x2)?.alpha;
            let z1 = BdState::new(h1, x1)?.rescaled(alpha);
            if within(&z1.h, &hs, delta) && within(&z1.x, &xs, delta) {
                pair = Some((z1, h2, x2));
                break;
            }
        }
        let (z1, h2, x2) =
            pair.ok_or_else(|| Error::numeric(MAX_REDRAWS, "no aligned pair inside the ball"))?;
        let v = BdProbe {
            dh: &z1.h - &h2,
            dx: &z1.x - &x2,
        };
        let g1 = 1.0 + delta * (2.0 * rng.random::<f64>() - 1.0);
        let g2 = 1.0 + delta * (2.0 * rng.random::<f64>() - 1.0);
        let w = obj.hessian_apply(&z, &v)?;
        let scaled = (v.dh.dotc(&w.dh) * g1 + v.dx.dotc(&w.dx) * g2).re;
        let lower = 4.0 * scaled / v.full_norm_squared();
        report.lower(lower);

        let mut u = BdProbe {
            dh: DVector::from_fn(k, |_, _| complex_gaussian(&mut rng)),
            dx: DVector::from_fn(k, |_, _| complex_gaussian(&mut rng)),
        };
        let mut est = 0.0;
        for _ in 0..cfg.power_iters.max(1) {
            let norm = (u.dh.norm_squared() + u.dx.norm_squared()).sqrt();
            u.dh.unscale_mut(norm);
            u.dx.unscale_mut(norm);
            let hu = obj.hessian_apply(&z, &u)?;
            est = (hu.dh.norm_squared() + hu.dx.norm_squared()).sqrt();
            u = hu;
        }
        report.upper(est);
        report.points.push(PointResult {
            point,
            min_curvature: lower,
            max_curvature: est,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// alignment objective

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConvexityConfig {
    pub k: usize,
    /// `(h, x)` within `delta` of a unit-norm truth and `|alpha - 1| <= 18 delta`.
    pub delta: f64,
    pub points: usize,
    pub probes: usize,
    pub lower: f64,
}

impl Default for AlignConvexityConfig {
    fn default() -> Self {
        Self {
            k: 10,
            delta: 0.02,
            points: 20,
            probes: 100,
            lower: 0.5,
        }
    }
}

/// Wirtinger Hessian of the alignment objective `g(alpha)` against
/// `(|u|^2 + |v|^2) * lower`.
pub fn alignment_convexity(
    cfg: &AlignConvexityConfig,
    master_seed: u64,
) -> Result<LandscapeReport> {
    let k = cfg.k;
    let mut rng = RngSeed::new(master_seed, 0).rng();
    let mut report = LandscapeReport::new("align", master_seed, cfg.lower, f64::INFINITY);
    for point in 0..cfg.points {
        let hs = unit_complex(&mut rng, k);
        let xs = unit_complex(&mut rng, k);
        let h = &hs + random_offset_c(&mut rng, k, cfg.delta);
        let x = &xs + random_offset_c(&mut rng, k, cfg.delta);
        let problem = AlignmentProblem::new(&h, &x, &hs, &xs)?;
        let mut res = PointResult {
            point,
            min_curvature: f64::INFINITY,
            max_curvature: f64::NEG_INFINITY,
        };
        for _ in 0..cfg.probes {
            let rad = 18.0 * cfg.delta * rng.random::<f64>();
            let phase = std::f64::consts::TAU * rng.random::<f64>();
            let alpha = C64::new(1.0, 0.0) + C64::from_polar(rad, phase);
            let u = complex_gaussian(&mut rng);
            let v = complex_gaussian(&mut rng);
            let ratio = problem.hessian_quadform(alpha, u, v) / (u.norm_sqr() + v.norm_sqr());
            report.lower(ratio);
            res.min_curvature = res.min_curvature.min(ratio);
            res.max_curvature = res.max_curvature.max(ratio);
        }
        report.points.push(res);
    }
    Ok(report)
}

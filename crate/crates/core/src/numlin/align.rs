//! Complex scalar alignment for the bilinear scaling ambiguity.
//!
//! Minimises `g(a) = ||h / conj(a) - h2||^2 + ||a x - x2||^2` over nonzero
//! complex `a`. All evaluations go through six inner products, so each Newton
//! step is O(1) after an O(K) setup.

use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMethod {
    Newton,
    GridFallback,
}

#[derive(Debug, Clone, Copy)]
pub struct AlignmentSolution {
    pub alpha: C64,
    pub objective: f64,
    pub converged: bool,
    pub method: AlignMethod,
}

/// Inner products defining `g` for one `(h, x)` / `(h2, x2)` pair.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentProblem {
    h_sq: f64,
    x_sq: f64,
    h2_sq: f64,
    x2_sq: f64,
    /// `h2^H h`
    h_cross: C64,
    /// `x^H x2`
    x_cross: C64,
}

const ALPHA_FLOOR: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: usize = 50;

impl AlignmentProblem {
    pub fn new(
        h: &DVector<C64>,
        x: &DVector<C64>,
        h2: &DVector<C64>,
        x2: &DVector<C64>,
    ) -> Result<Self> {
        Error::check_dim(h.len(), h2.len())?;
        Error::check_dim(x.len(), x2.len())?;
        let problem = Self {
            h_sq: h.norm_squared(),
            x_sq: x.norm_squared(),
            h2_sq: h2.norm_squared(),
            x2_sq: x2.norm_squared(),
            h_cross: h2.dotc(h),
            x_cross: x.dotc(x2),
        };
        if problem.h_sq == 0.0 || problem.x_sq == 0.0 {
            return Err(Error::invalid("alignment needs nonzero h and x"));
        }
        Ok(problem)
    }

    /// `g(alpha)` from the cached inner products.
    pub fn objective(&self, alpha: C64) -> f64 {
        let inv_conj = alpha.conj().inv();
        let h_part =
            self.h_sq * inv_conj.norm_sqr() - 2.0 * (self.h_cross * inv_conj).re + self.h2_sq;
        let x_part =
            self.x_sq * alpha.norm_sqr() - 2.0 * (alpha.conj() * self.x_cross).re + self.x2_sq;
        h_part + x_part
    }

    /// `dg/d conj(alpha)`; the conjugate entry of the Wirtinger gradient is its conjugate.
    pub fn gradient(&self, alpha: C64) -> C64 {
        let ac = alpha.conj();
        alpha * self.x_sq - self.x_cross - self.h_sq / (alpha * ac * ac) + self.h_cross / (ac * ac)
    }

    /// Wirtinger Hessian `[[d, c], [conj(c), d]]` returned as `(d, c)` where
    /// `c = d^2 g / d conj(alpha)^2`.
    pub fn hessian(&self, alpha: C64) -> (f64, C64) {
        let ac = alpha.conj();
        let diag = self.x_sq + self.h_sq / alpha.norm_sqr().powi(2);
        let off = 2.0 * self.h_sq / (alpha * ac * ac * ac) - 2.0 * self.h_cross / (ac * ac * ac);
        (diag, off)
    }

    /// `[u; v]^H H [u; v]` for the Wirtinger Hessian at `alpha`.
    pub fn hessian_quadform(&self, alpha: C64, u: C64, v: C64) -> f64 {
        let (d, c) = self.hessian(alpha);
        d * (u.norm_sqr() + v.norm_sqr()) + 2.0 * (u.conj() * v * c).re
    }

    fn real_gradient(&self, alpha: C64) -> Vector2<f64> {
        let g = self.gradient(alpha);
        Vector2::new(2.0 * g.re, 2.0 * g.im)
    }

    fn real_hessian(&self, alpha: C64) -> Matrix2<f64> {
        let (d, c) = self.hessian(alpha);
        Matrix2::new(2.0 * (d + c.re), 2.0 * c.im, 2.0 * c.im, 2.0 * (d - c.re))
    }

    fn newton(&self, start: C64) -> Option<C64> {
        let mut alpha = start;
        let mut value = self.objective(alpha);
        for _ in 0..MAX_NEWTON {
            let grad = self.real_gradient(alpha);
            if grad.norm() <= 1e-14 * value.abs().max(1.0) {
                return Some(alpha);
            }
            let hess = self.real_hessian(alpha);
            let step = match hess.cholesky() {
                Some(chol) => chol.solve(&(-grad)),
                // Indefinite away from the minimiser: scaled steepest descent.
                None => {
                    let (d, c) = self.hessian(alpha);
                    -grad / (2.0 * (d + c.norm()))
                }
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand = alpha + C64::new(step[0], step[1]) * t;
                if cand.norm() >= ALPHA_FLOOR {
                    let v = self.objective(cand);
                    // Near the minimum the objective is lost to cancellation,
                    // while the gradient still resolves the step.
                    if v < value || self.real_gradient(cand).norm() < 0.5 * grad.norm() {
                        accepted = Some((cand, v));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((cand, v)) => {
                    let moved = (cand - alpha).norm();
                    alpha = cand;
                    value = v.min(value);
                    if moved <= 1e-15 * alpha.norm() {
                        break;
                    }
                }
                // No decrease possible: either at the rounding floor or stuck.
                None => break,
            }
        }
        let grad = self.real_gradient(alpha);
        (grad.norm() <= GRAD_TOL * value.abs().max(1.0)).then_some(alpha)
    }

    fn grid_search(&self) -> C64 {
        const RADII: usize = 193;
        const PHASES: usize = 360;
        let (lo, hi) = ((1.0_f64 / 8.0).ln(), 8.0_f64.ln());
        let mut best = (C64::new(1.0, 0.0), self.objective(C64::new(1.0, 0.0)));
        for i in 0..RADII {
            let rad = (lo + (hi - lo) * i as f64 / (RADII - 1) as f64).exp();
            for j in 0..PHASES {
                let theta = std::f64::consts::TAU * j as f64 / PHASES as f64;
                let a = C64::from_polar(rad, theta);
                let v = self.objective(a);
                if v < best.1 {
                    best = (a, v);
                }
            }
        }
        best.0
    }

    pub fn solve(&self) -> AlignmentSolution {
        let one = C64::new(1.0, 0.0);
        if let Some(alpha) = self.newton(one) {
            if self.objective(alpha) <= self.objective(one) {
                return AlignmentSolution {
                    alpha,
                    objective: self.objective(alpha),
                    converged: true,
                    method: AlignMethod::Newton,
                };
            }
        }
        let seed = self.grid_search();
        let (alpha, converged) = match self.newton(seed) {
            Some(a) => (a, true),
            None => (seed, false),
        };
        AlignmentSolution {
            alpha,
            objective: self.objective(alpha),
            converged,
            method: AlignMethod::GridFallback,
        }
    }
}

/// Alignment parameter of `(h, x)` to `(h2, x2)`.
///
/// The returned objective is re-evaluated on the vectors, which keeps it
/// accurate when the aligned pair is very close to the target.
pub fn scalar_align(
    h: &DVector<C64>,
    x: &DVector<C64>,
    h2: &DVector<C64>,
    x2: &DVector<C64>,
) -> Result<AlignmentSolution> {
    let problem = AlignmentProblem::new(h, x, h2, x2)?;
    let mut sol = problem.solve();
    let inv_conj = sol.alpha.conj().inv();
    sol.objective = (h * inv_conj - h2).norm_squared() + (x * sol.alpha - x2).norm_squared();
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pair() -> (DVector<C64>, DVector<C64>) {
        let h = DVector::from_vec(vec![c(0.5, 0.1), c(-0.2, 0.7), c(0.3, -0.3)]);
        let x = DVector::from_vec(vec![c(0.1, 0.9), c(0.4, 0.0), c(-0.1, -0.2)]);
        (h.normalize(), x.normalize())
    }

    #[test]
    fn truth_aligns_to_one() {
        let (h, x) = pair();
        let s = scalar_align(&h, &x, &h, &x).unwrap();
        assert!((s.alpha - c(1.0, 0.0)).norm() < 1e-12);
        assert!(s.objective < 1e-24);
        assert_eq!(s.method, AlignMethod::Newton);
    }

    #[test]
    fn exact_scaling_is_recovered() {
        let (h, x) = pair();
        for a0 in [
            c(2.0, 0.0),
            c(0.5, 0.5),
            C64::from_polar(1.0, std::f64::consts::FRAC_PI_3),
            c(-3.0, 1.0),
        ] {
            let hs = &h * a0.conj();
            let xs = &x / a0;
            let s = scalar_align(&hs, &xs, &h, &x).unwrap();
            assert!((s.alpha - a0).norm() < 1e-9, "{a0} -> {}", s.alpha);
            assert!(s.objective < 1e-18);
        }
    }

    #[test]
    fn zero_input_is_rejected() {
        let (h, x) = pair();
        let z = DVector::from_element(3, c(0.0, 0.0));
        assert!(scalar_align(&z, &x, &h, &x).is_err());
        assert!(scalar_align(&h, &z, &h, &x).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (h, x) = pair();
        let (h2, x2) = (h.map(|v| v * c(1.1, 0.2)), x.map(|v| v + c(0.05, -0.02)));
        let p = AlignmentProblem::new(&h, &x, &h2, &x2).unwrap();
        let a = c(0.8, -0.3);
        let eps = 1e-6;
        let da = (p.objective(a + c(eps, 0.0)) - p.objective(a - c(eps, 0.0))) / (2.0 * eps);
        let db = (p.objective(a + c(0.0, eps)) - p.objective(a - c(0.0, eps))) / (2.0 * eps);
        let g = p.gradient(a);
        assert!((da - 2.0 * g.re).abs() < 1e-6);
        assert!((db - 2.0 * g.im).abs() < 1e-6);
        // second directional derivative matches the Wirtinger quadratic form
        let dir = c(0.6, 0.8);
        let d2 = (p.objective(a + dir * eps * 10.0) - 2.0 * p.objective(a)
            + p.objective(a - dir * eps * 10.0))
            / (eps * 10.0).powi(2);
        let q = p.hessian_quadform(a, dir, dir.conj());
        assert!((d2 - q).abs() < 1e-4 * q.abs().max(1.0), "{d2} vs {q}");
    }
}

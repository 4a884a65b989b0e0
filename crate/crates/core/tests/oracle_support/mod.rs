//! Reference computations written directly from the definitions, without
//! calling into the solver internals. Each `check_*` returns the largest
//! observed discrepancy.

#![allow(dead_code, clippy::needless_range_loop)]

use implicit_reg::blind_deconvolution::{
    bd_gradients, bd_hessian_quadform, bd_loss, bd_run, BdConfig, BdProbe, BdState,
};
use implicit_reg::ensembles::{
    gen_blind_deconv, gen_matrix_completion_unit, gen_phase_retrieval, partial_dft,
    BlindDeconvInstance, MatrixCompletionInstance, PhaseRetrievalInstance, RngSeed, SampleMask,
};
use implicit_reg::leave_one_out::{bd_loo_run, mc_loo_run, pr_loo_run};
use implicit_reg::matrix_completion::{
    mc_clean_hessian_apply, mc_gradient, mc_loss, project_l, project_omega, project_omega_l,
    project_omega_minus_l, McConfig,
};
use implicit_reg::numlin::{procrustes_align, scalar_align, top_eigs_sym};
use implicit_reg::phase_retrieval::{pr_gradient, pr_hessian_apply, pr_loss, PrConfig};
use implicit_reg::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; any continuous distribution serves the oracles.
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

pub fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| normal(rng))
}

pub fn rand_cvec(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| C64::new(normal(rng), normal(rng)))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// ---------------------------------------------------------------------------
// loss oracles

pub fn pr_loss_oracle(inst: &PhaseRetrievalInstance, x: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..inst.m {
        let mut ax = 0.0;
        for k in 0..inst.n {
            ax += inst.designs[(j, k)] * x[k];
        }
        acc += (ax * ax - inst.measurements[j]).powi(2);
    }
    acc / (4.0 * inst.m as f64)
}

pub fn mc_loss_oracle(inst: &MatrixCompletionInstance, x: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..inst.n {
        for k in 0..inst.n {
            if inst.mask.contains(j, k) {
                let mut m = 0.0;
                for c in 0..inst.r {
                    m += x[(j, c)] * x[(k, c)];
                }
                acc += (m - inst.observed[(j, k)]).powi(2);
            }
        }
    }
    acc / (4.0 * inst.p)
}

pub fn bd_loss_oracle(inst: &BlindDeconvInstance, h: &DVector<C64>, x: &DVector<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..inst.m {
        let (a, b) = (inst.design_a(j), inst.design_b(j));
        let bh = b.dotc(h);
        let xa = x.dotc(&a);
        acc += (bh * xa - inst.measurements[j]).norm_sqr();
    }
    acc
}

// ---------------------------------------------------------------------------
// finite differences

const FD_STEP: f64 = 1e-5;

fn central<F: Fn(f64) -> f64>(f: F) -> f64 {
    (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP)
}

/// Relative error of the analytic gradient against coordinate-wise central
/// differences of the loop-oracle loss, plus the analytic-vs-oracle loss gap.
pub fn check_pr_gradient(seed: u64) -> (f64, f64) {
    let inst = gen_phase_retrieval(8, 40, RngSeed::new(seed, 0)).unwrap();
    let x = rand_vec(&mut rng(seed), 8) * 0.7;
    let g = pr_gradient(&inst, &x).unwrap();
    let fd = DVector::from_fn(8, |i, _| {
        central(|t| {
            let mut y = x.clone();
            y[i] += t;
            pr_loss_oracle(&inst, &y)
        })
    });
    let loss_gap = rel(pr_loss(&inst, &x).unwrap(), pr_loss_oracle(&inst, &x));
    ((&g - &fd).norm() / fd.norm(), loss_gap)
}

pub fn check_mc_gradient(seed: u64) -> (f64, f64) {
    let inst = gen_matrix_completion_unit(12, 2, 0.5, 0.1, RngSeed::new(seed, 0)).unwrap();
    let x = rand_mat(&mut rng(seed), 12, 2) * 0.5;
    let g = mc_gradient(&inst, &x).unwrap();
    let fd = DMatrix::from_fn(12, 2, |i, c| {
        central(|t| {
            let mut y = x.clone();
            y[(i, c)] += t;
            mc_loss_oracle(&inst, &y)
        })
    });
    let loss_gap = rel(mc_loss(&inst, &x).unwrap(), mc_loss_oracle(&inst, &x));
    ((&g - &fd).norm() / fd.norm(), loss_gap)
}

/// For a real-valued `f` of complex `z`, `d/dt f(z + t e) = 2 Re(grad^H e)`
/// with the gradient taken against `conj(z)`.
pub fn check_bd_gradient(seed: u64) -> (f64, f64) {
    let inst = gen_blind_deconv(5, 20, RngSeed::new(seed, 0)).unwrap();
    let mut r = rng(seed);
    let h = rand_cvec(&mut r, 5) * C64::new(0.4, 0.0);
    let x = rand_cvec(&mut r, 5) * C64::new(0.4, 0.0);
    let (gh, gx) = bd_gradients(&inst, &h, &x).unwrap();
    let mut worst_num = 0.0;
    let mut denom = 0.0;
    for block in 0..2 {
        for i in 0..5 {
            for unit in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let fd = central(|t| {
                    let (mut h2, mut x2) = (h.clone(), x.clone());
                    if block == 0 {
                        h2[i] += unit * t;
                    } else {
                        x2[i] += unit * t;
                    }
                    bd_loss_oracle(&inst, &h2, &x2)
                });
                let g = if block == 0 { gh[i] } else { gx[i] };
                let analytic = 2.0 * (g.conj() * unit).re;
                worst_num += (analytic - fd).powi(2);
                denom += fd * fd;
            }
        }
    }
    let loss_gap = rel(
        bd_loss(&inst, &h, &x).unwrap(),
        bd_loss_oracle(&inst, &h, &x),
    );
    ((worst_num / denom).sqrt(), loss_gap)
}

/// Hessian-vector products against central differences of the gradient.
pub fn check_hessians(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut r = rng(seed);

    let inst = gen_phase_retrieval(6, 30, RngSeed::new(seed, 1)).unwrap();
    let x = rand_vec(&mut r, 6);
    let v = rand_vec(&mut r, 6);
    let hv = pr_hessian_apply(&inst, &x, &v).unwrap();
    let fd = (pr_gradient(&inst, &(&x + &v * FD_STEP)).unwrap()
        - pr_gradient(&inst, &(&x - &v * FD_STEP)).unwrap())
        / (2.0 * FD_STEP);
    worst = worst.max((&hv - &fd).norm() / fd.norm());

    // Without noise the clean Hessian is the Hessian of the loss.
    let inst = gen_matrix_completion_unit(10, 2, 0.6, 0.0, RngSeed::new(seed, 1)).unwrap();
    let x = rand_mat(&mut r, 10, 2);
    let v = rand_mat(&mut r, 10, 2);
    let hv = mc_clean_hessian_apply(&inst, &x, &v).unwrap();
    let fd = (mc_gradient(&inst, &(&x + &v * FD_STEP)).unwrap()
        - mc_gradient(&inst, &(&x - &v * FD_STEP)).unwrap())
        / (2.0 * FD_STEP);
    worst = worst.max((&hv - &fd).norm() / fd.norm());

    let inst = gen_blind_deconv(4, 16, RngSeed::new(seed, 1)).unwrap();
    let z = BdState::new(rand_cvec(&mut r, 4), rand_cvec(&mut r, 4)).unwrap();
    let probe = BdProbe {
        dh: rand_cvec(&mut r, 4),
        dx: rand_cvec(&mut r, 4),
    };
    let q = bd_hessian_quadform(&inst, &z, &probe).unwrap();
    let s = 1e-4;
    let f = |t: f64| {
        let c = C64::new(t, 0.0);
        bd_loss_oracle(&inst, &(&z.h + &probe.dh * c), &(&z.x + &probe.dx * c))
    };
    let fd = (f(s) - 2.0 * f(0.0) + f(-s)) / (s * s);
    worst.max(rel(q, fd))
}

/// Single-sample deconvolution: `f(z + t v) = |r + t s1 + t^2 s2|^2`, so the
/// second derivative at zero is `2 |s1|^2 + 4 Re(conj(r) s2)`.
pub fn check_bd_hessian_closed_form(seed: u64) -> f64 {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(1, 3, |_, _| C64::new(normal(&mut r), normal(&mut r)));
    let b = DMatrix::from_fn(1, 3, |_, _| C64::new(normal(&mut r), normal(&mut r)));
    let y = DVector::from_element(1, C64::new(normal(&mut r), normal(&mut r)));
    let inst = BlindDeconvInstance::new(a.clone(), b.clone(), y.clone(), None).unwrap();
    let (h, x) = (rand_cvec(&mut r, 3), rand_cvec(&mut r, 3));
    let probe = BdProbe {
        dh: rand_cvec(&mut r, 3),
        dx: rand_cvec(&mut r, 3),
    };
    // Row 0 of `a` holds a^H and row 0 of `b` holds b^H.
    let bh = |v: &DVector<C64>| (b.row(0) * v)[(0, 0)];
    let ax = |v: &DVector<C64>| (a.row(0) * v)[(0, 0)];
    let res = bh(&h) * ax(&x).conj() - y[0];
    let s1 = bh(&probe.dh) * ax(&x).conj() + bh(&h) * ax(&probe.dx).conj();
    let s2 = bh(&probe.dh) * ax(&probe.dx).conj();
    let want = 2.0 * s1.norm_sqr() + 4.0 * (res.conj() * s2).re;
    let got = bd_hessian_quadform(&inst, &BdState::new(h, x).unwrap(), &probe).unwrap();
    rel(got, want)
}

// ---------------------------------------------------------------------------
// eigen, Procrustes, alignment

/// Cyclic Jacobi eigenvalue iteration; returns eigenvalues and eigenvectors
/// sorted descending.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (values, vectors)
}

/// Largest gap in eigenvalues and (sign-matched) eigenvectors between
/// `top_eigs_sym` and Jacobi, on a matrix with separated spectrum.
pub fn check_eigen(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 9;
    let q = rand_mat(&mut r, n, n).qr().q();
    let spectrum = DVector::from_fn(n, |i, _| 5.0 - 1.1 * i as f64);
    let m = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let got = top_eigs_sym(&m, 4).unwrap();
    let (vals, vecs) = jacobi_eigen(&m);
    let mut worst: f64 = 0.0;
    for c in 0..4 {
        worst = worst.max((got.values[c] - vals[c]).abs());
        let u = got.vectors.column(c);
        let w = vecs.column(c);
        let sign = if u.dot(&w) >= 0.0 { 1.0 } else { -1.0 };
        worst = worst.max((u - w * sign).amax());
    }
    worst
}

fn rot2(theta: f64, reflect: bool) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    if reflect {
        DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
    } else {
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }
}

/// Two-column Procrustes against a brute-force search over rotations and
/// reflections (coarse grid, then ternary refinement). Returns the largest
/// entrywise difference of the aligning matrix and the residual gap.
pub fn check_procrustes(seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let xs = rand_mat(&mut r, 7, 2);
    let x = &xs * rot2(1.234 + seed as f64, seed % 2 == 1) + rand_mat(&mut r, 7, 2) * 0.3;
    let cost = |t: f64, refl: bool| (&x * rot2(t, refl) - &xs).norm();
    let mut best = (f64::INFINITY, 0.0, false);
    for refl in [false, true] {
        for i in 0..3600 {
            let t = i as f64 * std::f64::consts::TAU / 3600.0;
            let c = cost(t, refl);
            if c < best.0 {
                best = (c, t, refl);
            }
        }
    }
    let (mut lo, mut hi) = (best.1 - 0.01, best.1 + 0.01);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if cost(m1, best.2) < cost(m2, best.2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    let oracle = rot2(t, best.2);
    let got = procrustes_align(&x, &xs).unwrap();
    (
        (&got.rotation - &oracle).amax(),
        (got.residual - cost(t, best.2)).abs(),
    )
}

/// Alignment of `(h, x)` onto `(h2, x2)` against a polar grid over `alpha`
/// followed by successively finer local grids.
pub fn check_alignment(seed: u64) -> f64 {
    let mut r = rng(seed);
    let h2 = rand_cvec(&mut r, 4);
    let x2 = rand_cvec(&mut r, 4);
    let alpha_true = C64::from_polar(1.3 + 0.2 * seed as f64, 0.7 * seed as f64);
    let h = &h2 * alpha_true.conj() + rand_cvec(&mut r, 4) * C64::new(0.05, 0.0);
    let x = &x2 / alpha_true + rand_cvec(&mut r, 4) * C64::new(0.05, 0.0);
    let g = |a: C64| (&h / a.conj() - &h2).norm_squared() + (&x * a - &x2).norm_squared();
    let mut best = (f64::INFINITY, C64::new(1.0, 0.0));
    for i in 0..400 {
        let rad = (0.05f64.ln() + (20.0f64.ln() - 0.05f64.ln()) * i as f64 / 399.0).exp();
        for k in 0..360 {
            let a = C64::from_polar(rad, k as f64 * std::f64::consts::TAU / 360.0);
            let v = g(a);
            if v < best.0 {
                best = (v, a);
            }
        }
    }
    let mut span = 0.05 * best.1.norm();
    for _ in 0..40 {
        let centre = best.1;
        for i in -10..=10 {
            for k in -10..=10 {
                let a = centre + C64::new(i as f64, k as f64) * (span / 10.0);
                let v = g(a);
                if v < best.0 {
                    best = (v, a);
                }
            }
        }
        span *= 0.3;
    }
    let got = scalar_align(&h, &x, &h2, &x2).unwrap();
    (got.alpha - best.1).norm()
}

// ---------------------------------------------------------------------------
// projections and DFT

pub fn random_mask(seed: u64, n: usize, p: f64) -> SampleMask {
    let mut r = rng(seed);
    let mut upper = Vec::new();
    for j in 0..n {
        for k in j..n {
            if r.random::<f64>() < p {
                upper.push((j, k));
            }
        }
    }
    SampleMask::from_upper(n, upper)
}

/// Number of entries where a projection differs from its loop definition.
pub fn check_projections(seed: u64) -> usize {
    let n = 7;
    let mask = random_mask(seed, n, 0.4);
    let m = rand_mat(&mut rng(seed + 100), n, n);
    let mut mismatches = 0;
    let po = project_omega(&mask, &m).unwrap();
    for j in 0..n {
        for k in 0..n {
            let want = if mask.contains(j, k) { m[(j, k)] } else { 0.0 };
            mismatches += usize::from(po[(j, k)] != want);
        }
    }
    for l in 0..n {
        let pl = project_l(&m, l).unwrap();
        let pol = project_omega_l(&mask, &m, l).unwrap();
        let pml = project_omega_minus_l(&mask, &m, l).unwrap();
        for j in 0..n {
            for k in 0..n {
                let on_line = j == l || k == l;
                let sampled = mask.contains(j, k);
                let want_l = if on_line { m[(j, k)] } else { 0.0 };
                let want_ol = if on_line && sampled { m[(j, k)] } else { 0.0 };
                let want_ml = if !on_line && sampled { m[(j, k)] } else { 0.0 };
                mismatches += usize::from(pl[(j, k)] != want_l);
                mismatches += usize::from(pol[(j, k)] != want_ol);
                mismatches += usize::from(pml[(j, k)] != want_ml);
            }
        }
    }
    mismatches
}

/// Entry formula, `B^H B = I_K`, full-size unitarity and column sums of the
/// partial DFT.
pub fn check_dft() -> f64 {
    let mut worst: f64 = 0.0;
    for (m, k) in [(8, 3), (16, 16), (30, 7), (64, 10)] {
        let b = partial_dft(m, k).unwrap();
        for l in 0..m {
            for c in 0..k {
                let ang = -std::f64::consts::TAU * (l * c) as f64 / m as f64;
                let want = C64::from_polar(1.0 / (m as f64).sqrt(), ang);
                worst = worst.max((b[(l, c)] - want).norm());
            }
        }
        let g = b.adjoint() * &b;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(want, 0.0)).norm());
            }
        }
        // sum_l B_{l,c} = sqrt(m) [c = 0]
        for c in 0..k {
            let s: C64 = b.column(c).iter().sum();
            let want = if c == 0 { (m as f64).sqrt() } else { 0.0 };
            worst = worst.max((s - C64::new(want, 0.0)).norm());
        }
        if m == k {
            let f = &b * b.adjoint();
            worst = worst.max(
                (f - DMatrix::<C64>::identity(m, m))
                    .iter()
                    .map(|v| v.norm())
                    .fold(0.0, f64::max),
            );
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// leave-one-out oracles

/// Phase retrieval with a duplicated sample, leaving out the copy. The
/// oracle runs Wirtinger flow by hand on the original samples with the
/// `1/(m+1)` normalisation of the enlarged instance.
pub fn check_pr_duplicate_loo() -> f64 {
    let designs = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 1.2, 0.8, -0.9]);
    let xstar = DVector::from_vec(vec![0.6, 0.8]);
    let y = (&designs * &xstar).map(|v| v * v);
    let inst =
        PhaseRetrievalInstance::new(designs.clone(), y.clone(), Some(xstar.clone())).unwrap();
    let dup = inst.with_duplicated_sample(1).unwrap();
    let conf = PrConfig {
        eta: 0.1,
        max_iters: 30,
        tol_rel: 0.0,
        ..PrConfig::default()
    };
    let traj = pr_loo_run(&dup, &conf, 3).unwrap();

    let norm = 4.0;
    let mut data = DMatrix::zeros(2, 2);
    for j in 0..3 {
        let a = designs.row(j).transpose();
        data += &a * a.transpose() * (y[j] / norm);
    }
    let (vals, vecs) = jacobi_eigen(&data);
    let mut x: DVector<f64> = vecs.column(0) * (vals[0] / 3.0).sqrt();
    if (&x - &xstar).norm() > (&x + &xstar).norm() {
        x = -x;
    }
    let mut worst: f64 = 0.0;
    for kept in &traj.iterates_kept {
        worst = worst.max((kept - &x).norm());
        let mut g = DVector::zeros(2);
        for j in 0..3 {
            let a = designs.row(j).transpose();
            let ax = a.dot(&x);
            g += a * ((ax * ax - y[j]) * ax / norm);
        }
        x -= g * 0.1;
    }
    worst
}

/// Blind deconvolution has an unnormalised loss, so leaving out a duplicated
/// copy reproduces the full run on the original instance.
pub fn check_bd_duplicate_loo(seed: u64) -> f64 {
    let inst = gen_blind_deconv(4, 24, RngSeed::new(seed, 0)).unwrap();
    let dup = inst.with_duplicated_sample(5).unwrap();
    let conf = BdConfig {
        eta: 0.5,
        max_iters: 30,
        tol_rel: 0.0,
        record_every: 1,
    };
    let full = bd_run(&inst, &conf).unwrap();
    let loo = bd_loo_run(&dup, &conf, 24).unwrap();
    full.iterates_kept
        .iter()
        .zip(&loo.iterates_kept)
        .map(|(a, b)| (&a.h - &b.h).norm() + (&a.x - &b.x).norm())
        .fold(0.0, f64::max)
}

/// First matrix completion leave-one-out step against
/// `X1 = X0 - eta [(1/p) P_{Omega^-l}(X0 X0^T - Y) + P_l(X0 X0^T - M*)] X0`
/// with `X0` from the top eigenpairs of `P_{Omega^-l}(Y)/p + P_l(M*)`.
pub fn check_mc_loo_step(seed: u64) -> f64 {
    let (n, r, l, eta) = (6, 2, 2, 0.2);
    let inst = gen_matrix_completion_unit(n, r, 0.7, 0.05, RngSeed::new(seed, 0)).unwrap();
    let mstar = inst.truth_matrix().unwrap().clone();
    let conf = McConfig {
        eta,
        max_iters: 1,
        tol_rel: 0.0,
        ..McConfig::default()
    };
    let traj = mc_loo_run(&inst, &conf, l).unwrap();

    let on_line = |j: usize, k: usize| j == l || k == l;
    let m0 = DMatrix::from_fn(n, n, |j, k| {
        if on_line(j, k) {
            mstar[(j, k)]
        } else if inst.mask.contains(j, k) {
            inst.observed[(j, k)] / inst.p
        } else {
            0.0
        }
    });
    let (vals, vecs) = jacobi_eigen(&m0);
    let mut x0 = DMatrix::zeros(n, r);
    for c in 0..r {
        let mut v = vecs.column(c).clone_owned();
        // largest-magnitude entry positive, lowest index on ties
        let mut arg = 0;
        for i in 1..n {
            if v[i].abs() > v[arg].abs() + 1e-12 {
                arg = i;
            }
        }
        if v[arg] < 0.0 {
            v = -v;
        }
        x0.set_column(c, &(v * vals[c].sqrt()));
    }
    let mm = &x0 * x0.transpose();
    let resid = DMatrix::from_fn(n, n, |j, k| {
        if on_line(j, k) {
            mm[(j, k)] - mstar[(j, k)]
        } else if inst.mask.contains(j, k) {
            (mm[(j, k)] - inst.observed[(j, k)]) / inst.p
        } else {
            0.0
        }
    });
    let x1 = &x0 - resid * &x0 * eta;
    (&traj.iterates_kept[0] - &x0)
        .amax()
        .max((&traj.iterates_kept[1] - &x1).amax())
}

mod oracle_support;

use oracle_support::*;

#[test]
fn pr_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let (g, loss) = check_pr_gradient(seed);
        assert!(g <= 1e-6, "seed {seed}: gradient rel err {g:e}");
        assert!(loss <= 1e-12, "seed {seed}: loss rel err {loss:e}");
    }
}

#[test]
fn mc_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let (g, loss) = check_mc_gradient(seed);
        assert!(g <= 1e-6, "seed {seed}: gradient rel err {g:e}");
        assert!(loss <= 1e-12, "seed {seed}: loss rel err {loss:e}");
    }
}

#[test]
fn bd_gradient_matches_finite_differences() {
    for seed in 0..3 {
        let (g, loss) = check_bd_gradient(seed);
        assert!(g <= 1e-6, "seed {seed}: gradient rel err {g:e}");
        assert!(loss <= 1e-12, "seed {seed}: loss rel err {loss:e}");
    }
}

#[test]
fn hessian_products_match_finite_differences() {
    for seed in 0..3 {
        let e = check_hessians(seed);
        assert!(e <= 1e-5, "seed {seed}: {e:e}");
    }
}

#[test]
fn bd_hessian_single_sample_closed_form() {
    for seed in 0..5 {
        let e = check_bd_hessian_closed_form(seed);
        assert!(e <= 1e-12, "seed {seed}: {e:e}");
    }
}

#[test]
fn jacobi_oracle_self_check() {
    let m = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
    let (vals, vecs) = jacobi_eigen(&m);
    for (got, want) in vals.iter().zip([5.0, 3.0, 1.0]) {
        assert!((got - want).abs() < 1e-13);
    }
    let back = &vecs
        * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals))
        * vecs.transpose();
    assert!((back - m).amax() < 1e-13);
}

#[test]
fn eigensolver_matches_jacobi() {
    for seed in 0..3 {
        let e = check_eigen(seed);
        assert!(e <= 1e-10, "seed {seed}: {e:e}");
    }
}

#[test]
fn procrustes_matches_rotation_grid() {
    for seed in 0..4 {
        let (rot, res) = check_procrustes(seed);
        assert!(rot <= 1e-5, "seed {seed}: rotation gap {rot:e}");
        assert!(res <= 1e-10, "seed {seed}: residual gap {res:e}");
    }
}

#[test]
fn scalar_alignment_matches_grid() {
    for seed in 0..4 {
        let e = check_alignment(seed);
        assert!(e <= 1e-4, "seed {seed}: alpha gap {e:e}");
    }
}

#[test]
fn projections_match_loops_exactly() {
    for seed in 0..5 {
        assert_eq!(check_projections(seed), 0, "seed {seed}");
    }
}

#[test]
fn partial_dft_identities() {
    let e = check_dft();
    assert!(e <= 1e-10, "{e:e}");
}

#[test]
fn pr_duplicate_sample_leave_one_out() {
    let e = check_pr_duplicate_loo();
    assert!(e <= 1e-12, "{e:e}");
}

#[test]
fn bd_duplicate_sample_leave_one_out() {
    for seed in 0..2 {
        let e = check_bd_duplicate_loo(seed);
        assert!(e <= 1e-10, "seed {seed}: {e:e}");
    }
}

#[test]
fn mc_leave_one_out_first_step() {
    for seed in 0..3 {
        let e = check_mc_loo_step(seed);
        assert!(e <= 1e-10, "seed {seed}: {e:e}");
    }
}

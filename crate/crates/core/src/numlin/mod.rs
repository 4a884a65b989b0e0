//! Dense linear-algebra primitives shared by the three solvers.

mod align;
mod eig;
mod procrustes;
mod svd;

pub use align::{scalar_align, AlignMethod, AlignmentProblem, AlignmentSolution};
pub use eig::{top_eigs_sym, EigResult};
pub use procrustes::{procrustes_align, sign_matrix, ProcrustesResult};
pub use svd::{top_singular_triplet, SvdTriple};

use nalgebra::DMatrix;

/// Spectral norm of a dense real matrix via the eigenvalues of its smaller Gram matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let gram = if cols <= rows {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    gram.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v))
        .sqrt()
}

/// `max_j ||e_j^T M||_2`.
pub fn two_to_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|row| row.norm()).fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

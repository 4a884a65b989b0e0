use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Optimal orthonormal alignment of one factor onto another.
#[derive(Debug, Clone)]
pub struct ProcrustesResult {
    /// `r x r` orthonormal `H` minimising `||X H - X*||_F`.
    pub rotation: DMatrix<f64>,
    /// `||X H - X*||_F`.
    pub residual: f64,
    /// `X^T X*` is (numerically) rank deficient, so `H` is not unique.
    pub degenerate: bool,
}

/// Sign matrix `U V^T` of a square matrix with SVD `U S V^T`, plus a flag set
/// when the smallest singular value is negligible.
pub fn sign_matrix(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if !b.is_square() || b.nrows() == 0 {
        return Err(Error::invalid("sign matrix needs a non-empty square input"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(0, "non-finite entry in Procrustes input"));
    }
    let r = b.nrows();
    let max_iter = 200 * r.max(10);
    let svd = nalgebra::SVD::try_new(b.clone(), true, true, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::numeric(max_iter, "SVD did not converge"))?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let degenerate = smin <= 1e-12 * smax.max(f64::MIN_POSITIVE);
    Ok((u * v_t, degenerate))
}

/// Solves `min_{R orthonormal} ||X R - X*||_F` through the sign matrix of `X^T X*`.
pub fn procrustes_align(x: &DMatrix<f64>, xstar: &DMatrix<f64>) -> Result<ProcrustesResult> {
    if x.shape() != xstar.shape() {
        return Err(Error::invalid(format!(
            "factor shapes differ: {:?} vs {:?}",
            x.shape(),
            xstar.shape()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("Procrustes needs r >= 1"));
    }
    let (rotation, degenerate) = sign_matrix(&(x.transpose() * xstar))?;
    let residual = (x * &rotation - xstar).norm();
    Ok(ProcrustesResult {
        rotation,
        residual,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_factors_give_identity() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.2, -0.3, 1.0, 0.5, 0.5, 2.0, -1.0]);
        let p = procrustes_align(&x, &x).unwrap();
        assert!((p.rotation - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!(p.residual < 1e-12);
        assert!(!p.degenerate);
    }

    #[test]
    fn rank_one_reduces_to_sign() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, -1.0]);
        let xs = DMatrix::from_column_slice(3, 1, &[-1.0, -1.5, 0.5]);
        let p = procrustes_align(&x, &xs).unwrap();
        assert!((p.rotation[(0, 0)] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn certificate_is_symmetric_psd() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, -1.0, 0.5]);
        let xs = DMatrix::from_row_slice(3, 2, &[0.3, -1.0, 2.0, 0.1, 0.0, 1.0]);
        let p = procrustes_align(&x, &xs).unwrap();
        let h = &p.rotation;
        assert!((h.transpose() * h - DMatrix::<f64>::identity(2, 2)).norm() < 1e-10);
        let cert = h.transpose() * x.transpose() * &xs;
        assert!((&cert - cert.transpose()).norm() < 1e-8);
        assert!(cert.symmetric_eigenvalues().min() > -1e-8);
    }

    #[test]
    fn zero_cross_gram_is_degenerate() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let xs = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let p = procrustes_align(&x, &xs).unwrap();
        assert!(p.degenerate);
        assert!((p.rotation[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let x = DMatrix::<f64>::zeros(3, 2);
        let xs = DMatrix::<f64>::zeros(3, 1);
        assert!(procrustes_align(&x, &xs).is_err());
    }
}

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigResult {
    /// Descending.
    pub values: Vec<f64>,
    /// `n x r`, orthonormal columns.
    pub vectors: DMatrix<f64>,
}

const SYMMETRY_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;

/// Top `r` eigenpairs (by algebraic value) of a dense symmetric matrix.
///
/// Each eigenvector is signed so that its entry of largest magnitude is
/// positive, the lowest index winning ties.
pub fn top_eigs_sym(m: &DMatrix<f64>, r: usize) -> Result<EigResult> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::invalid(format!(
            "matrix is {rows} x {cols}, not square"
        )));
    }
    let n = rows;
    if r == 0 || r > n {
        return Err(Error::invalid(format!(
            "need 1 <= r <= n, got r = {r}, n = {n}"
        )));
    }
    let scale = super::max_abs(m).max(1.0);
    for j in 0..n {
        for k in (j + 1)..n {
            if (m[(j, k)] - m[(k, j)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({j}, {k})"
                )));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(0, "non-finite entry in eigen input"));
    }

    let max_iter = 100 * n.max(10);
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::numeric(max_iter, "symmetric eigensolver did not converge"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let norm = eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));

    let mut values = Vec::with_capacity(r);
    let mut vectors = DMatrix::zeros(n, r);
    for (c, &idx) in order.iter().take(r).enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        orient(&mut v);
        let lambda = eig.eigenvalues[idx];
        let residual = (m * &v - &v * lambda).norm();
        if residual > RESIDUAL_TOL * norm.max(f64::MIN_POSITIVE) && residual > 1e-300 {
            return Err(Error::numeric(
                max_iter,
                format!("eigenpair {c} residual {residual:.3e} exceeds tolerance"),
            ));
        }
        values.push(lambda);
        vectors.set_column(c, &v);
    }
    Ok(EigResult { values, vectors })
}

fn orient(v: &mut DVector<f64>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let e = top_eigs_sym(&m, 2).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0]);
        assert_eq!(e.vectors.column(0), DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert_eq!(e.vectors.column(1), DVector::from_vec(vec![0.0, 1.0, 0.0]));
    }

    #[test]
    fn sign_convention_flips_negative_peak() {
        // top eigenvector of this matrix is +-(1, -2)/sqrt(5)
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -2.0, 4.0]);
        let e = top_eigs_sym(&m, 1).unwrap();
        assert!((e.values[0] - 5.0).abs() < 1e-12);
        assert!(e.vectors[(1, 0)] > 0.0);
        assert!(e.vectors[(0, 0)] < 0.0);
    }

    #[test]
    fn rejects_non_symmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            top_eigs_sym(&m, 1),
            Err(Error::InvalidArgument(_))
        ));
        let sq = DMatrix::<f64>::zeros(2, 3);
        assert!(top_eigs_sym(&sq, 1).is_err());
        assert!(top_eigs_sym(&DMatrix::<f64>::identity(2, 2), 3).is_err());
    }

    #[test]
    fn population_phase_retrieval_matrix() {
        let x = DVector::from_vec(vec![0.6, -0.8, 0.0]);
        let m = DMatrix::identity(3, 3) + &x * x.transpose() * 2.0;
        let e = top_eigs_sym(&m, 1).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        let v = e.vectors.column(0);
        assert!((v - &x).norm().min((v + &x).norm()) < 1e-12);
    }
}

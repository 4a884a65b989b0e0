use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::C64;

/// Leading singular value with its singular vectors.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    pub sigma1: f64,
    pub left: DVector<C64>,
    pub right: DVector<C64>,
    /// False when the matrix is zero and the vectors are placeholders.
    pub converged: bool,
}

const RESIDUAL_TOL: f64 = 1e-8;

/// Leading singular triplet of a dense complex matrix.
///
/// The pair is rotated by a common phase so that the largest-magnitude entry
/// of `left` is real and positive.
pub fn top_singular_triplet(m: &DMatrix<C64>) -> Result<SvdTriple> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::numeric(0, "non-finite entry in SVD input"));
    }
    if m.iter().all(|v| v.norm_sqr() == 0.0) {
        let mut left = DVector::from_element(rows, C64::new(0.0, 0.0));
        let mut right = DVector::from_element(cols, C64::new(0.0, 0.0));
        left[0] = C64::new(1.0, 0.0);
        right[0] = C64::new(1.0, 0.0);
        return Ok(SvdTriple {
            sigma1: 0.0,
            left,
            right,
            converged: false,
        });
    }

    let max_iter = 200 * rows.max(cols).max(10);
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::numeric(max_iter, "SVD did not converge"))?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^H");

    let mut top = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > svd.singular_values[top] {
            top = i;
        }
    }
    let sigma1 = svd.singular_values[top];
    let mut left: DVector<C64> = u.column(top).into_owned();
    let mut right: DVector<C64> = v_t.row(top).adjoint();

    let mut peak = 0;
    for (i, z) in left.iter().enumerate() {
        if z.norm() > left[peak].norm() {
            peak = i;
        }
    }
    let phase = C64::from_polar(1.0, -left[peak].arg());
    left *= phase;
    right *= phase;
    left[peak] = C64::new(left[peak].re, 0.0);

    let residual = (m * &right - &left * C64::new(sigma1, 0.0)).norm();
    if residual > RESIDUAL_TOL * sigma1 {
        return Err(Error::numeric(
            max_iter,
            format!("singular triplet residual {residual:.3e} exceeds tolerance"),
        ));
    }
    Ok(SvdTriple {
        sigma1,
        left,
        right,
        converged: true,
    })
}

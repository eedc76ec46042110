//! Dense helpers: symmetric checks, factorization-based log-determinants,
//! and clamped eigendecompositions for rank-deficient PSD matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative eigenvalue floor below which a PSD matrix is rejected.
pub const PSD_TOLERANCE: f64 = 1e-8;

pub(crate) fn check_square<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context,
            expected: (m.nrows(), m.nrows()),
            found: m.shape(),
        });
    }
    Ok(())
}

pub(crate) fn check_dims<T: Real>(m: &DMatrix<T>, expected: (usize, usize), context: &'static str) -> Result<()> {
    if m.shape() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found: m.shape(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite_value()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// Symmetry up to a relative tolerance scaled by the largest entry.
pub fn is_symmetric<T: Real>(m: &DMatrix<T>) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.magnitude()));
    let tol = T::eps_floor(1e-10) * scale.max(T::one());
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).magnitude() <= tol))
}

pub(crate) fn check_symmetric<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<()> {
    check_square(m, context)?;
    check_finite(m, context)?;
    if !is_symmetric(m) {
        return Err(Error::NotSymmetric(context));
    }
    Ok(())
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::lit(0.5);
    (m + m.transpose()) * half
}

pub(crate) fn cholesky<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<Cholesky<T, Dyn>> {
    check_symmetric(m, context)?;
    Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite(context))
}

/// `log |M|` for symmetric positive-definite `M`, from the Cholesky diagonal.
pub fn log_det_spd<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<T> {
    let chol = cholesky(m, context)?;
    Ok(chol_log_det(&chol))
}

pub(crate) fn chol_log_det<T: Real>(chol: &Cholesky<T, Dyn>) -> T {
    let l = chol.l_dirty();
    let two = T::lit(2.0);
    (0..l.nrows()).fold(T::zero(), |acc, i| acc + two * l[(i, i)].ln())
}

/// `log |det M|` for a general square matrix via LU with partial pivoting.
pub fn log_abs_det<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<T> {
    check_square(m, context)?;
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = T::zero();
    for i in 0..u.nrows() {
        let d = u[(i, i)].magnitude();
        if d == T::zero() {
            return Err(Error::NotPositiveDefinite(context));
        }
        acc += d.ln();
    }
    Ok(acc)
}

/// Symmetric eigendecomposition of a PSD matrix.
///
/// Eigenvalues in `[-PSD_TOLERANCE * max, 0)` are clamped to zero; anything
/// more negative is an error. Eigenpairs are returned in descending order.
pub fn psd_eigen<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<(DVector<T>, DMatrix<T>)> {
    check_symmetric(m, context)?;
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let max = if n == 0 {
        T::zero()
    } else {
        eig.eigenvalues[order[0]].max(T::zero())
    };
    let floor = -(T::eps_floor(PSD_TOLERANCE) * max);
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let v = eig.eigenvalues[i];
        if v < floor {
            return Err(Error::NotPsd {
                context,
                min_eig: v.as_f64(),
            });
        }
        values[k] = v.max(T::zero());
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Number of eigenvalues above `rel_tol * max` in a descending spectrum.
pub fn numerical_rank<T: Real>(desc: &DVector<T>, rel_tol: f64) -> usize {
    if desc.is_empty() {
        return 0;
    }
    let cut = T::lit(rel_tol) * desc[0];
    desc.iter().take_while(|&&v| v > cut && v > T::zero()).count()
}

/// A factor `F` (m × r) with `F Fᵀ = M` for PSD `M`, dropping null directions.
pub fn psd_factor<T: Real>(m: &DMatrix<T>, context: &'static str) -> Result<DMatrix<T>> {
    let (values, vectors) = psd_eigen(m, context)?;
    let r = numerical_rank(&values, 1e-14);
    let mut f = DMatrix::zeros(m.nrows(), r);
    for k in 0..r {
        let s = values[k].sqrt();
        f.set_column(k, &(vectors.column(k) * s));
    }
    Ok(f)
}

/// Singular values of `m`, descending.
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let mut s: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

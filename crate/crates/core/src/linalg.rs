//! Small dense linear-algebra helpers for symmetric matrices.
//!
//! Everything here works on `nalgebra::DMatrix<f64>` and goes through the
//! symmetric eigendecomposition, which is exact enough for the k ≤ ~50
//! outcome dimensions this crate targets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute tolerance (scaled by `max(1, max|M_ij|)`) for symmetry and for
/// negative eigenvalues that are clipped to zero.
pub const PSD_TOL: f64 = 1e-10;

/// Eigenvalue floor below which a covariance is regularised.
pub const REGULARIZATION_FLOOR: f64 = 1e-9;

fn scale_of(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()))
}

/// Checks squareness and symmetry, returning the symmetrised copy.
pub fn symmetrize_checked(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation(format!(
            "matrix is not square ({}x{})",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    let tol = PSD_TOL * scale_of(m);
    let asym = (m - m.transpose()).amax();
    if asym > tol {
        return Err(Error::validation(format!(
            "matrix is not symmetric (max |M - M^T| = {asym:e})"
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Eigendecomposition of a symmetric PSD matrix with eigenvalues clipped at 0.
///
/// Eigenvalues below `-PSD_TOL * scale` are rejected.
pub fn psd_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let sym = symmetrize_checked(m)?;
    let tol = PSD_TOL * scale_of(&sym);
    let mut eig = SymmetricEigen::new(sym);
    for ev in eig.eigenvalues.iter_mut() {
        if *ev < -tol {
            return Err(Error::validation(format!(
                "matrix is indefinite (eigenvalue {ev:e})"
            )));
        }
        if *ev < 0.0 {
            *ev = 0.0;
        }
    }
    Ok(eig)
}

fn recompose(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
    let out = v * d * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(m)?;
    Ok(recompose(&eig, f64::sqrt))
}

/// Inverse principal square root of a symmetric positive-definite matrix.
pub fn inv_sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(m)?;
    if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
        if min <= 0.0 {
            return Err(Error::validation(
                "matrix is singular; inverse square root undefined",
            ));
        }
    }
    Ok(recompose(&eig, |x| 1.0 / x.sqrt()))
}

/// Adds `1e-9 * max(trace/k, 1) * I` when the smallest eigenvalue is below
/// `1e-9`.
///
/// The unit floor keeps near-constant groups (rounding-level spread) on the
/// same footing as exactly constant ones.
pub fn regularize_covariance(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = psd_eigen(cov)?;
    let k = cov.nrows();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let sym = (cov + cov.transpose()) * 0.5;
    if min >= REGULARIZATION_FLOOR {
        return Ok(sym);
    }
    let mean_var = sym.trace() / k as f64;
    let scale = mean_var.max(1.0);
    Ok(sym + DMatrix::identity(k, k) * (REGULARIZATION_FLOOR * scale))
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn sym_operator_norm(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest singular value of a general matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(*v))
}

/// Column means of an `n × k` sample matrix.
pub fn column_mean(samples: &DMatrix<f64>) -> DVector<f64> {
    let n = samples.nrows() as f64;
    DVector::from_iterator(
        samples.ncols(),
        samples.column_iter().map(|c| c.sum() / n),
    )
}

/// Unbiased sample covariance (`n - 1` denominator); requires `n ≥ 2`.
pub fn sample_covariance(samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::validation(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let mean = column_mean(samples);
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    Ok((&cov + cov.transpose()) * 0.5)
}

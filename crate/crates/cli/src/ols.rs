//! Closed-form least squares with an intercept.

use nalgebra::{DMatrix, DVector};
use fairfront::linalg::spectral_norm;
use fairfront::{Error, Result};

/// Relative normal-equation residual accepted after a solve.
pub const NORMAL_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct OlsModel {
    /// `k × p`, one row per outcome.
    pub weights: DMatrix<f64>,
    pub intercept: DVector<f64>,
    pub rank: usize,
    pub columns: usize,
    /// `‖Xᵀ(Xβ − Y)‖_F / (‖X‖_F ‖Y‖_F)` on the design with intercept.
    pub normal_residual: f64,
    pub notes: Vec<String>,
}

impl OlsModel {
    pub fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.weights * x + &self.intercept
    }

    /// Uniform Lipschitz constant in the Euclidean feature metric.
    pub fn lipschitz(&self) -> f64 {
        spectral_norm(&self.weights)
    }
}

/// Fits `y ≈ W x + b` for `x` rows of `features` (`n × p`) and `y` rows of
/// `outcomes` (`n × k`), solving through the SVD pseudo-inverse.
pub fn fit_ols(features: &DMatrix<f64>, outcomes: &DMatrix<f64>) -> Result<OlsModel> {
    let (n, p) = features.shape();
    if outcomes.nrows() != n {
        return Err(Error::Dimension {
            expected: n,
            got: outcomes.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::Validation("OLS needs at least one row".into()));
    }
    let mut design = DMatrix::from_element(n, p + 1, 1.0);
    design.view_mut((0, 1), (n, p)).copy_from(features);

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = f64::EPSILON * (n.max(p + 1)) as f64 * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let beta = svd
        .solve(outcomes, tol)
        .map_err(|e| Error::Validation(format!("least-squares solve failed: {e}")))?;

    let grad = design.transpose() * (&design * &beta - outcomes);
    let scale = design.norm() * outcomes.norm();
    let normal_residual = if scale > 0.0 { grad.norm() / scale } else { grad.norm() };
    if !beta.iter().all(|b| b.is_finite()) || normal_residual > NORMAL_RESIDUAL_TOL {
        return Err(Error::Convergence {
            iterations: 1,
            residual: normal_residual,
        });
    }

    let mut notes = Vec::new();
    if rank < p + 1 {
        notes.push(format!(
            "design matrix has rank {rank} < {} columns; minimum-norm pseudo-inverse solution",
            p + 1
        ));
    }
    Ok(OlsModel {
        weights: beta.rows(1, p).transpose(),
        intercept: beta.row(0).transpose(),
        rank,
        columns: p + 1,
        normal_residual,
        notes,
    })
}

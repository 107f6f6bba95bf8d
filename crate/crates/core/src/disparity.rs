//! Wasserstein distances between group marginals and the Wasserstein
//! disparity
//!
//! ```text
//! D(Ŷ, Z)² = Σ_{z1} Σ_{z2} λ_{z1} λ_{z2} W2²(μ_{z1}, μ_{z2})
//! ```
//!
//! summed over ordered pairs (the diagonal contributes zero).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::empirical::{group_weights, GroupedDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, regularize_covariance, sqrtm_psd};
use crate::quantile::sorted_copy;
use crate::transport::{rms_displacement, BarycenterModel, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisparityMethod {
    #[serde(rename = "quantile1d")]
    Quantile1d,
    Bures,
    ExactAssignment,
}

impl DisparityMethod {
    /// Method that measures the geometry a model of this variant transports in.
    pub fn for_variant(v: Variant) -> Self {
        match v {
            Variant::Quantile => DisparityMethod::Quantile1d,
            Variant::Affine => DisparityMethod::Bures,
        }
    }

    /// `quantile1d` for 1-D data, `bures` otherwise.
    pub fn default_for_dims(k: usize) -> Self {
        if k == 1 {
            DisparityMethod::Quantile1d
        } else {
            DisparityMethod::Bures
        }
    }
}

impl fmt::Display for DisparityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DisparityMethod::Quantile1d => "quantile1d",
            DisparityMethod::Bures => "bures",
            DisparityMethod::ExactAssignment => "exact-assignment",
        })
    }
}

impl std::str::FromStr for DisparityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile1d" | "quantile" => Ok(DisparityMethod::Quantile1d),
            "bures" => Ok(DisparityMethod::Bures),
            "exact-assignment" | "exact" => Ok(DisparityMethod::ExactAssignment),
            other => Err(Error::validation(format!("unknown disparity method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityReport {
    pub method: DisparityMethod,
    pub labels: Vec<String>,
    /// `pairwise[i][j] = W2(labels[i], labels[j])`.
    pub pairwise: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub disparity: f64,
}

impl DisparityReport {
    pub fn pair(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.pairwise[i][j])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `W2` between two 1-D empirical laws.
///
/// Exact `W2` between the uniform empirical laws of `a` and `b`.
///
/// Both step quantile functions are integrated over the merged breakpoints
/// `i / n_a` and `j / n_b`. For equal sizes this is the RMS gap of the
/// sorted samples.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("w2_1d needs non-empty samples"));
    }
    let sa = sorted_copy(a);
    let sb = sorted_copy(b);
    Ok(w2_sorted(&sa, &sb))
}

fn w2_sorted(sa: &[f64], sb: &[f64]) -> f64 {
    let (na, nb) = (sa.len(), sb.len());
    if na == nb {
        let s: f64 = sa.iter().zip(sb).map(|(x, y)| (x - y) * (x - y)).sum();
        return (s / na as f64).sqrt();
    }
    // positions in units of 1 / (na nb): a steps every nb, b every na
    let (step_a, step_b) = (nb as u128, na as u128);
    let (mut i, mut j, mut pos) = (0usize, 0usize, 0u128);
    let mut s = 0.0;
    while i < na && j < nb {
        let next = ((i as u128 + 1) * step_a).min((j as u128 + 1) * step_b);
        let d = sa[i] - sb[j];
        s += (next - pos) as f64 * d * d;
        pos = next;
        if pos == (i as u128 + 1) * step_a {
            i += 1;
        }
        if pos == (j as u128 + 1) * step_b {
            j += 1;
        }
    }
    (s / (na as f64 * nb as f64)).sqrt()
}

/// Closed-form `W2` between `N(m1, Σ1)` and `N(m2, Σ2)`.
pub fn w2_bures(
    m1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    m2: &DVector<f64>,
    cov2: &DMatrix<f64>,
) -> Result<f64> {
    let k = m1.len();
    if m2.len() != k || cov1.nrows() != k || cov2.nrows() != k {
        return Err(Error::Dimension {
            expected: k,
            got: m2.len().max(cov1.nrows()).max(cov2.nrows()),
        });
    }
    for c in [cov1, cov2] {
        let eig = linalg::psd_eigen(c)?;
        if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(Error::validation("covariance is not positive definite"));
        }
    }
    let root1 = sqrtm_psd(cov1)?;
    let inner = &root1 * cov2 * &root1;
    let cross = sqrtm_psd(&((&inner + inner.transpose()) * 0.5))?;
    let bures_sq = cov1.trace() + cov2.trace() - 2.0 * cross.trace();
    let sq = (m1 - m2).norm_squared() + bures_sq;
    Ok(sq.max(0.0).sqrt())
}

/// Largest sample count accepted by [`w2_exact_small`].
pub const EXACT_MAX_N: usize = 10;

/// Exact discrete `W2` between two equal-size point clouds.
///
/// Solves the assignment problem by dynamic programming over subsets of
/// the second cloud (`O(n² 2ⁿ)`); meant as a test oracle.
pub fn w2_exact_small(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::Unsupported(format!(
            "exact assignment needs equal sizes ({} vs {})",
            n,
            b.nrows()
        )));
    }
    if n == 0 || n > EXACT_MAX_N {
        return Err(Error::Unsupported(format!(
            "exact assignment supports 1..={EXACT_MAX_N} points, got {n}"
        )));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (a.row(i) - b.row(j)).norm_squared()).collect())
        .collect();
    let full = 1usize << n;
    let mut best = vec![f64::INFINITY; full];
    best[0] = 0.0;
    for mask in 0..full {
        let cur = best[mask];
        if !cur.is_finite() {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == n {
            continue;
        }
        for (j, c) in cost[i].iter().enumerate() {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let v = cur + c;
                if v < best[next] {
                    best[next] = v;
                }
            }
        }
    }
    Ok((best[full - 1] / n as f64).sqrt())
}

fn gaussian_summary(label: &str, m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.nrows() < 2 {
        return Err(Error::validation(format!(
            "group `{label}` has {} sample(s); the bures method needs at least 2",
            m.nrows()
        )));
    }
    Ok((
        linalg::column_mean(m),
        regularize_covariance(&linalg::sample_covariance(m)?)?,
    ))
}

/// Pairwise `W2` matrix and Wasserstein disparity of a grouped dataset.
pub fn wasserstein_disparity(ds: &GroupedDataset, method: DisparityMethod) -> Result<DisparityReport> {
    let labels: Vec<String> = ds.labels().map(str::to_string).collect();
    let g = labels.len();
    let mut pairwise = vec![vec![0.0; g]; g];

    match method {
        DisparityMethod::Quantile1d => {
            if ds.dims() != 1 {
                return Err(Error::Dimension {
                    expected: 1,
                    got: ds.dims(),
                });
            }
            let sorted: Vec<Vec<f64>> = ds.iter().map(|(_, m)| sorted_copy(m.as_slice())).collect();
            for i in 0..g {
                for j in i + 1..g {
                    let w = w2_sorted(&sorted[i], &sorted[j]);
                    pairwise[i][j] = w;
                    pairwise[j][i] = w;
                }
            }
        }
        DisparityMethod::Bures => {
            let summaries: Vec<_> = ds
                .iter()
                .map(|(l, m)| gaussian_summary(l, m))
                .collect::<Result<_>>()?;
            for i in 0..g {
                for j in i + 1..g {
                    let (m1, c1) = &summaries[i];
                    let (m2, c2) = &summaries[j];
                    let w = w2_bures(m1, c1, m2, c2)?;
                    pairwise[i][j] = w;
                    pairwise[j][i] = w;
                }
            }
        }
        DisparityMethod::ExactAssignment => {
            let mats: Vec<&DMatrix<f64>> = ds.iter().map(|(_, m)| m).collect();
            for i in 0..g {
                for j in i + 1..g {
                    let w = w2_exact_small(mats[i], mats[j])?;
                    pairwise[i][j] = w;
                    pairwise[j][i] = w;
                }
            }
        }
    }

    let weights = group_weights(ds);
    let lambda: Vec<f64> = labels.iter().map(|l| weights[l]).collect();
    let mut sq = 0.0;
    for i in 0..g {
        for j in 0..g {
            sq += lambda[i] * lambda[j] * pairwise[i][j] * pairwise[i][j];
        }
    }
    Ok(DisparityReport {
        method,
        labels,
        pairwise,
        disparity: sq.sqrt(),
    })
}

/// Independence projection loss: RMS of `‖f*(y_i, z_i) − y_i‖` over `ds`.
pub fn projection_loss(model: &BarycenterModel, ds: &GroupedDataset) -> Result<f64> {
    model.check_compatible(ds)?;
    rms_displacement(ds, |z, y| model.apply(y, z))
}

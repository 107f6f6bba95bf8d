//! Optimal transport maps from each group onto the Wasserstein barycenter.
//!
//! Two estimators are provided:
//!
//! - [`fit_quantile_barycenter`]: exact 1-D matching. The barycenter
//!   quantile function is the `λ`-weighted average of the group quantile
//!   functions, and the map of group `z` sends its `i`-th order statistic to
//!   the barycenter quantile at the same midpoint rank.
//! - [`fit_affine_barycenter`]: the Gaussian (Bures) estimator for any
//!   outcome dimension. Each group is summarised by its mean and covariance,
//!   the barycenter covariance solves the Bures fixed-point equation, and
//!   the map is `y ↦ m̄ + A_z (y − m_z)`.
//!
//! Models serialise to JSON (see [`BarycenterModel::to_json`]) so the CLI
//! can fit once and transform or certify later.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::empirical::{group_weights, GroupedDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, inv_sqrtm_spd, regularize_covariance};
use crate::quantile::{quantile_at, sorted_copy, Rank};

pub use crate::linalg::sqrtm_psd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Quantile,
    Affine,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Quantile => "quantile",
            Variant::Affine => "affine",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(Variant::Quantile),
            "affine" => Ok(Variant::Affine),
            other => Err(Error::validation(format!(
                "unknown variant `{other}` (expected quantile or affine)"
            ))),
        }
    }
}

/// Monotone piecewise-linear 1-D map through `(source, target)` knots.
///
/// Tied source knots are merged and their targets averaged, so the map is a
/// function. Outside the knot range the boundary displacement is carried
/// on unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMap1D {
    source: Vec<f64>,
    target: Vec<f64>,
}

impl QuantileMap1D {
    pub fn new(source: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if source.is_empty() || source.len() != target.len() {
            return Err(Error::validation(format!(
                "knot vectors must be non-empty and of equal length ({} vs {})",
                source.len(),
                target.len()
            )));
        }
        if source.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::validation("knots must be finite"));
        }
        if source.windows(2).any(|w| w[0] > w[1]) || target.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::validation("knots must be ascending"));
        }
        let mut src = Vec::with_capacity(source.len());
        let mut tgt = Vec::with_capacity(target.len());
        let mut i = 0;
        while i < source.len() {
            let mut j = i + 1;
            while j < source.len() && source[j] == source[i] {
                j += 1;
            }
            let block = &target[i..j];
            let avg = if block.len() == 1 {
                block[0]
            } else {
                block.iter().sum::<f64>() / block.len() as f64
            };
            src.push(source[i]);
            tgt.push(avg);
            i = j;
        }
        Ok(QuantileMap1D {
            source: src,
            target: tgt,
        })
    }

    pub fn source_knots(&self) -> &[f64] {
        &self.source
    }

    pub fn target_knots(&self) -> &[f64] {
        &self.target
    }

    pub fn apply(&self, y: f64) -> f64 {
        let n = self.source.len();
        match self.source.binary_search_by(|s| s.total_cmp(&y)) {
            Ok(j) => self.target[j],
            Err(0) => y + (self.target[0] - self.source[0]),
            Err(j) if j == n => y + (self.target[n - 1] - self.source[n - 1]),
            Err(j) => {
                let (s0, s1) = (self.source[j - 1], self.source[j]);
                let (t0, t1) = (self.target[j - 1], self.target[j]);
                t0 + (y - s0) / (s1 - s0) * (t1 - t0)
            }
        }
    }

    /// `sup_y |T(y) − y|` over the whole real line.
    ///
    /// The displacement is piecewise linear and constant beyond the end
    /// knots, so the supremum is attained at a knot.
    pub fn sup_displacement(&self) -> f64 {
        self.source
            .iter()
            .zip(&self.target)
            .map(|(s, t)| (t - s).abs())
            .fold(0.0, f64::max)
    }
}

/// `y ↦ m̄ + A (y − m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub group_mean: DVector<f64>,
    pub linear: DMatrix<f64>,
    pub barycenter_mean: DVector<f64>,
}

impl AffineMap {
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.barycenter_mean + &self.linear * (y - &self.group_mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupMap {
    Quantile(QuantileMap1D),
    Affine(AffineMap),
}

/// Per-group maps onto the barycenter, with weights and projection loss `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct BarycenterModel {
    variant: Variant,
    dims: usize,
    maps: BTreeMap<String, GroupMap>,
    weights: BTreeMap<String, f64>,
    projection_loss: f64,
    barycenter_cov: Option<DMatrix<f64>>,
}

impl BarycenterModel {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Independence projection loss `V` (RMS displacement of the fitted maps).
    pub fn projection_loss(&self) -> f64 {
        self.projection_loss
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }

    pub fn map(&self, label: &str) -> Option<&GroupMap> {
        self.maps.get(label)
    }

    pub fn maps(&self) -> impl Iterator<Item = (&str, &GroupMap)> {
        self.maps.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Barycenter covariance `Σ̄` (affine variant only).
    pub fn barycenter_cov(&self) -> Option<&DMatrix<f64>> {
        self.barycenter_cov.as_ref()
    }

    /// Evaluates `f*(y, z)`.
    pub fn apply(&self, y: &DVector<f64>, z: &str) -> Result<DVector<f64>> {
        if y.len() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("input must be finite"));
        }
        match self.maps.get(z) {
            None => Err(Error::UnknownGroup(z.to_string())),
            Some(GroupMap::Quantile(q)) => Ok(DVector::from_element(1, q.apply(y[0]))),
            Some(GroupMap::Affine(a)) => Ok(a.apply(y)),
        }
    }

    /// Errors unless every group of `ds` has a map and the dimensions agree.
    pub fn check_compatible(&self, ds: &GroupedDataset) -> Result<()> {
        if ds.dims() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                got: ds.dims(),
            });
        }
        for label in ds.labels() {
            if !self.maps.contains_key(label) {
                return Err(Error::UnknownGroup(label.to_string()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `f*(y, z)` for a slice input.
pub fn apply_map(model: &BarycenterModel, y: &[f64], z: &str) -> Result<Vec<f64>> {
    let out = model.apply(&DVector::from_column_slice(y), z)?;
    Ok(out.iter().copied().collect())
}

/// RMS of `‖f(y_i, z_i) − y_i‖` over every sample of `ds`.
pub(crate) fn rms_displacement<F>(ds: &GroupedDataset, mut f: F) -> Result<f64>
where
    F: FnMut(&str, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut sum = 0.0;
    for (label, m) in ds.iter() {
        for row in m.row_iter() {
            let y = row.transpose();
            sum += (f(label, &y)? - &y).norm_squared();
        }
    }
    Ok((sum / ds.total_n() as f64).sqrt())
}

/// Exact 1-D barycenter by quantile averaging.
pub fn fit_quantile_barycenter(ds: &GroupedDataset) -> Result<BarycenterModel> {
    if ds.dims() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: ds.dims(),
        });
    }
    let weights = group_weights(ds);
    let sorted: BTreeMap<&str, Vec<f64>> = ds
        .iter()
        .map(|(label, m)| (label, sorted_copy(m.as_slice())))
        .collect();
    let mut maps = BTreeMap::new();
    for (&label, xs) in &sorted {
        let n = xs.len();
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                let r = Rank::midpoint(i, n);
                sorted
                    .iter()
                    .map(|(&w, ys)| weights[w] * quantile_at(ys, r))
                    .sum()
            })
            .collect();
        maps.insert(
            label.to_string(),
            GroupMap::Quantile(QuantileMap1D::new(xs.clone(), targets)?),
        );
    }
    finish(Variant::Quantile, ds, maps, weights, None)
}

fn finish(
    variant: Variant,
    ds: &GroupedDataset,
    maps: BTreeMap<String, GroupMap>,
    weights: BTreeMap<String, f64>,
    barycenter_cov: Option<DMatrix<f64>>,
) -> Result<BarycenterModel> {
    let mut model = BarycenterModel {
        variant,
        dims: ds.dims(),
        maps,
        weights,
        projection_loss: 0.0,
        barycenter_cov,
    };
    model.projection_loss = rms_displacement(ds, |z, y| model.apply(y, z))?;
    Ok(model)
}

/// Stopping rule for [`bures_fixed_point`].
///
/// The iteration stops once the Frobenius residual is at most
/// `tol * max(1, ‖Σ̄‖_F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// `Σ_z λ_z (S^{1/2} Σ_z S^{1/2})^{1/2}` given `S^{1/2}`.
fn fixed_point_map(
    s_root: &DMatrix<f64>,
    covs: &[DMatrix<f64>],
    weights: &[f64],
) -> Result<DMatrix<f64>> {
    let k = s_root.nrows();
    let mut acc = DMatrix::zeros(k, k);
    for (c, &w) in covs.iter().zip(weights) {
        let inner = s_root * c * s_root;
        acc += sqrtm_psd(&((&inner + inner.transpose()) * 0.5))? * w;
    }
    Ok(acc)
}

/// Bures-Wasserstein barycenter of centred Gaussians.
///
/// Starts from the weighted arithmetic mean and iterates
/// `S ← S^{-1/2} (Σ_z λ_z (S^{1/2} Σ_z S^{1/2})^{1/2})² S^{-1/2}`.
pub fn bures_fixed_point(
    covs: &[DMatrix<f64>],
    weights: &[f64],
    opts: FixedPointOptions,
) -> Result<DMatrix<f64>> {
    if covs.is_empty() || covs.len() != weights.len() {
        return Err(Error::validation(format!(
            "need one weight per covariance ({} covariances, {} weights)",
            covs.len(),
            weights.len()
        )));
    }
    let k = covs[0].nrows();
    for c in covs {
        if c.nrows() != k || c.ncols() != k {
            return Err(Error::Dimension {
                expected: k,
                got: c.nrows(),
            });
        }
        let eig = linalg::psd_eigen(c)?;
        if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(Error::validation("covariance is not positive definite"));
        }
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::validation("weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("weights sum to {total}, not 1")));
    }

    let mut s = covs
        .iter()
        .zip(weights)
        .fold(DMatrix::zeros(k, k), |acc, (c, &w)| acc + c * w);
    let mut residual = f64::INFINITY;
    for _ in 0..=opts.max_iter {
        let root = sqrtm_psd(&s)?;
        let m = fixed_point_map(&root, covs, weights)?;
        residual = (&s - &m).norm();
        if residual <= opts.tol * s.norm().max(1.0) {
            return Ok(s);
        }
        let inv_root = inv_sqrtm_spd(&s)?;
        let next = &inv_root * &m * &m * &inv_root;
        s = (&next + next.transpose()) * 0.5;
    }
    Err(Error::Convergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Fixed-point residual of a candidate barycenter covariance.
pub fn bures_residual(bary: &DMatrix<f64>, covs: &[DMatrix<f64>], weights: &[f64]) -> Result<f64> {
    let root = sqrtm_psd(bary)?;
    Ok((bary - fixed_point_map(&root, covs, weights)?).norm())
}

/// Optimal affine estimate of the barycenter maps.
pub fn fit_affine_barycenter(ds: &GroupedDataset) -> Result<BarycenterModel> {
    fit_affine_barycenter_with(ds, FixedPointOptions::default())
}

pub fn fit_affine_barycenter_with(
    ds: &GroupedDataset,
    opts: FixedPointOptions,
) -> Result<BarycenterModel> {
    let weights = group_weights(ds);
    let mut means = Vec::new();
    let mut covs = Vec::new();
    let mut w = Vec::new();
    for (label, m) in ds.iter() {
        if m.nrows() < 2 {
            return Err(Error::validation(format!(
                "group `{label}` has {} sample(s); the affine estimator needs at least 2",
                m.nrows()
            )));
        }
        means.push(linalg::column_mean(m));
        covs.push(regularize_covariance(&linalg::sample_covariance(m)?)?);
        w.push(weights[label]);
    }
    let bary_cov = bures_fixed_point(&covs, &w, opts)?;
    let bary_mean = means
        .iter()
        .zip(&w)
        .fold(DVector::zeros(ds.dims()), |acc, (m, &l)| acc + m * l);

    let mut maps = BTreeMap::new();
    for ((label, _), (mean, cov)) in ds.iter().zip(means.into_iter().zip(&covs)) {
        let root = sqrtm_psd(cov)?;
        let inv_root = inv_sqrtm_spd(cov)?;
        let middle = sqrtm_psd(&(&root * &bary_cov * &root))?;
        let a = &inv_root * middle * &inv_root;
        let a = (&a + a.transpose()) * 0.5;
        maps.insert(
            label.to_string(),
            GroupMap::Affine(AffineMap {
                group_mean: mean,
                linear: a,
                barycenter_mean: bary_mean.clone(),
            }),
        );
    }
    finish(Variant::Affine, ds, maps, weights, Some(bary_cov))
}

// ---------------------------------------------------------------------------
// JSON layout

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
enum ModelFile {
    Quantile {
        dims: usize,
        weights: BTreeMap<String, f64>,
        projection_loss: f64,
        groups: BTreeMap<String, QuantileKnots>,
    },
    Affine {
        dims: usize,
        weights: BTreeMap<String, f64>,
        projection_loss: f64,
        barycenter_mean: Vec<f64>,
        barycenter_cov: Vec<Vec<f64>>,
        groups: BTreeMap<String, AffineParams>,
    },
}

#[derive(Serialize, Deserialize)]
struct QuantileKnots {
    source_knots: Vec<f64>,
    target_knots: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AffineParams {
    mean: Vec<f64>,
    linear: Vec<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], k: usize) -> Result<DMatrix<f64>> {
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::validation(format!("expected a {k}x{k} matrix")));
    }
    Ok(DMatrix::from_row_iterator(k, k, rows.iter().flatten().copied()))
}

impl From<BarycenterModel> for ModelFile {
    fn from(m: BarycenterModel) -> Self {
        match m.variant {
            Variant::Quantile => ModelFile::Quantile {
                dims: m.dims,
                weights: m.weights,
                projection_loss: m.projection_loss,
                groups: m
                    .maps
                    .into_iter()
                    .filter_map(|(k, g)| match g {
                        GroupMap::Quantile(q) => Some((
                            k,
                            QuantileKnots {
                                source_knots: q.source,
                                target_knots: q.target,
                            },
                        )),
                        GroupMap::Affine(_) => None,
                    })
                    .collect(),
            },
            Variant::Affine => {
                let bary_mean = m
                    .maps
                    .values()
                    .find_map(|g| match g {
                        GroupMap::Affine(a) => Some(a.barycenter_mean.iter().copied().collect()),
                        GroupMap::Quantile(_) => None,
                    })
                    .unwrap_or_default();
                ModelFile::Affine {
                    dims: m.dims,
                    weights: m.weights,
                    projection_loss: m.projection_loss,
                    barycenter_mean: bary_mean,
                    barycenter_cov: m.barycenter_cov.as_ref().map(rows_of).unwrap_or_default(),
                    groups: m
                        .maps
                        .into_iter()
                        .filter_map(|(k, g)| match g {
                            GroupMap::Affine(a) => Some((
                                k,
                                AffineParams {
                                    mean: a.group_mean.iter().copied().collect(),
                                    linear: rows_of(&a.linear),
                                },
                            )),
                            GroupMap::Quantile(_) => None,
                        })
                        .collect(),
                }
            }
        }
    }
}

impl TryFrom<ModelFile> for BarycenterModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let model = match f {
            ModelFile::Quantile {
                dims,
                weights,
                projection_loss,
                groups,
            } => {
                if dims != 1 {
                    return Err(Error::Dimension {
                        expected: 1,
                        got: dims,
                    });
                }
                let maps = groups
                    .into_iter()
                    .map(|(k, q)| {
                        Ok((
                            k,
                            GroupMap::Quantile(QuantileMap1D::new(q.source_knots, q.target_knots)?),
                        ))
                    })
                    .collect::<Result<_>>()?;
                BarycenterModel {
                    variant: Variant::Quantile,
                    dims,
                    maps,
                    weights,
                    projection_loss,
                    barycenter_cov: None,
                }
            }
            ModelFile::Affine {
                dims,
                weights,
                projection_loss,
                barycenter_mean,
                barycenter_cov,
                groups,
            } => {
                if barycenter_mean.len() != dims {
                    return Err(Error::Dimension {
                        expected: dims,
                        got: barycenter_mean.len(),
                    });
                }
                let bary_mean = DVector::from_vec(barycenter_mean);
                let maps = groups
                    .into_iter()
                    .map(|(k, a)| {
                        if a.mean.len() != dims {
                            return Err(Error::Dimension {
                                expected: dims,
                                got: a.mean.len(),
                            });
                        }
                        Ok((
                            k,
                            GroupMap::Affine(AffineMap {
                                group_mean: DVector::from_vec(a.mean),
                                linear: matrix_from_rows(&a.linear, dims)?,
                                barycenter_mean: bary_mean.clone(),
                            }),
                        ))
                    })
                    .collect::<Result<_>>()?;
                BarycenterModel {
                    variant: Variant::Affine,
                    dims,
                    maps,
                    weights,
                    projection_loss,
                    barycenter_cov: Some(matrix_from_rows(&barycenter_cov, dims)?),
                }
            }
        };
        if !(model.projection_loss >= 0.0) {
            return Err(Error::validation("projection_loss must be non-negative"));
        }
        if model.maps.len() != model.weights.len()
            || model.maps.keys().any(|k| !model.weights.contains_key(k))
        {
            return Err(Error::validation("weights and group maps name different labels"));
        }
        Ok(model)
    }
}

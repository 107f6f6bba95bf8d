//! Grouped prediction samples.
//!
//! A [`GroupedDataset`] holds one `n_z × k` sample matrix per sensitive
//! group label. Each group's empirical law is the uniform distribution on
//! its rows, and group weights are the empirical frequencies `n_z / n`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantile;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: BTreeMap<String, DMatrix<f64>>,
    dims: usize,
}

impl GroupedDataset {
    /// Validates and wraps per-group sample matrices.
    pub fn new(groups: BTreeMap<String, DMatrix<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::validation(format!(
                "need at least 2 distinct groups, got {}",
                groups.len()
            )));
        }
        let dims = groups.values().next().map(|m| m.ncols()).unwrap_or(0);
        if dims == 0 {
            return Err(Error::validation("outcome dimension must be at least 1"));
        }
        for (label, m) in &groups {
            if m.nrows() == 0 {
                return Err(Error::validation(format!("group `{label}` is empty")));
            }
            if m.ncols() != dims {
                return Err(Error::Dimension {
                    expected: dims,
                    got: m.ncols(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "group `{label}` contains non-finite values"
                )));
            }
        }
        Ok(GroupedDataset { groups, dims })
    }

    /// Builds a dataset from `(label, row)` pairs, preserving row order
    /// within each group.
    pub fn from_rows<S, I>(dims: usize, rows: I) -> Result<Self>
    where
        S: Into<String>,
        I: IntoIterator<Item = (S, Vec<f64>)>,
    {
        let mut buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (label, row) in rows {
            if row.len() != dims {
                return Err(Error::Dimension {
                    expected: dims,
                    got: row.len(),
                });
            }
            buckets.entry(label.into()).or_default().extend(row);
        }
        let groups = buckets
            .into_iter()
            .map(|(label, flat)| {
                let n = flat.len() / dims.max(1);
                (label, DMatrix::from_row_slice(n, dims, &flat))
            })
            .collect();
        Self::new(groups)
    }

    /// Convenience constructor for 1-D data.
    pub fn from_1d<S: Into<String>>(groups: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self> {
        let groups = groups
            .into_iter()
            .map(|(label, v)| (label.into(), DMatrix::from_column_slice(v.len(), 1, &v)))
            .collect();
        Self::new(groups)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn total_n(&self) -> usize {
        self.groups.values().map(|m| m.nrows()).sum()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    pub fn group(&self, label: &str) -> Option<&DMatrix<f64>> {
        self.groups.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DMatrix<f64>)> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Column `0` of a group, for 1-D data.
    pub fn group_values(&self, label: &str) -> Option<Vec<f64>> {
        self.groups
            .get(label)
            .map(|m| m.column(0).iter().copied().collect())
    }

    /// Largest Euclidean norm over all samples.
    pub fn max_sample_norm(&self) -> f64 {
        self.groups
            .values()
            .flat_map(|m| m.row_iter().map(|r| r.norm()))
            .fold(0.0, f64::max)
    }

    pub fn group_weights(&self) -> BTreeMap<String, f64> {
        group_weights(self)
    }

    /// Applies `f` to every sample, keeping labels and row order.
    pub fn map_rows<F>(&self, mut f: F) -> Result<GroupedDataset>
    where
        F: FnMut(&str, DVector<f64>) -> Result<DVector<f64>>,
    {
        let mut groups = BTreeMap::new();
        for (label, m) in &self.groups {
            let mut out = DMatrix::zeros(m.nrows(), m.ncols());
            for (i, row) in m.row_iter().enumerate() {
                let y = f(label, row.transpose())?;
                if y.len() != self.dims {
                    return Err(Error::Dimension {
                        expected: self.dims,
                        got: y.len(),
                    });
                }
                out.set_row(i, &y.transpose());
            }
            groups.insert(label.clone(), out);
        }
        GroupedDataset::new(groups)
    }

    /// Writes the dataset as CSV, one group after another.
    ///
    /// Floats are printed in Rust's shortest round-trip form, so reading the
    /// file back reproduces every value bit-for-bit.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        outcome_cols: &[String],
        group_col: &str,
    ) -> Result<()> {
        if outcome_cols.len() != self.dims {
            return Err(Error::Dimension {
                expected: self.dims,
                got: outcome_cols.len(),
            });
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = outcome_cols.iter().map(String::as_str).collect();
        header.push(group_col);
        w.write_record(&header)?;
        for (label, m) in &self.groups {
            for row in m.row_iter() {
                let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                rec.push(label.clone());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, outcome_cols: &[String], group_col: &str) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), outcome_cols, group_col)
    }
}

/// Empirical group weights `λ_z = n_z / n`.
pub fn group_weights(ds: &GroupedDataset) -> BTreeMap<String, f64> {
    let total = ds.total_n() as f64;
    ds.groups
        .iter()
        .map(|(k, m)| (k.clone(), m.nrows() as f64 / total))
        .collect()
}

/// Reads a grouped dataset from CSV at `path`.
pub fn load_csv(
    path: impl AsRef<Path>,
    outcome_cols: &[String],
    group_col: &str,
) -> Result<GroupedDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, outcome_cols, group_col)
}

/// Reads a grouped dataset from any CSV source with a header row.
pub fn read_csv<R: Read>(reader: R, outcome_cols: &[String], group_col: &str) -> Result<GroupedDataset> {
    if outcome_cols.is_empty() {
        return Err(Error::validation("at least one outcome column is required"));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let outcome_idx: Vec<usize> = outcome_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let group_idx = find(group_col)?;

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let label = record
            .get(group_idx)
            .ok_or_else(|| Error::Parse {
                row: line,
                column: group_col.to_string(),
                message: "missing field".into(),
            })?
            .to_string();
        let mut row = Vec::with_capacity(outcome_idx.len());
        for (&idx, name) in outcome_idx.iter().zip(outcome_cols) {
            let cell = record.get(idx).unwrap_or("").trim();
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: name.clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: name.clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            row.push(value);
        }
        rows.push((label, row));
    }
    GroupedDataset::from_rows(outcome_cols.len(), rows)
}

/// One Gaussian group of a [`SyntheticSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianGroup {
    pub label: String,
    pub mean: Vec<f64>,
    /// Row-major `k × k` covariance.
    pub cov: Vec<Vec<f64>>,
    pub n: usize,
}

impl GaussianGroup {
    /// 1-D group `N(mean, variance)`.
    pub fn univariate(label: impl Into<String>, mean: f64, variance: f64, n: usize) -> Self {
        GaussianGroup {
            label: label.into(),
            mean: vec![mean],
            cov: vec![vec![variance]],
            n,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub groups: Vec<GaussianGroup>,
    pub seed: u64,
}

/// Draws `n_z` samples from `N(m_z, Σ_z)` for every group.
///
/// The stream is `ChaCha8Rng::seed_from_u64(seed)`; standard normals come
/// from `rand_distr::StandardNormal` (ziggurat) and are consumed row by row,
/// groups in the order given. Each sample is `m + Σ^{1/2} ξ` with the
/// symmetric square root, so singular covariances are allowed.
pub fn synth_gaussian(spec: &SyntheticSpec) -> Result<GroupedDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut groups = BTreeMap::new();
    for g in &spec.groups {
        let k = g.mean.len();
        if k == 0 {
            return Err(Error::validation(format!("group `{}` has empty mean", g.label)));
        }
        if g.n == 0 {
            return Err(Error::validation(format!("group `{}` has n = 0", g.label)));
        }
        if g.cov.len() != k || g.cov.iter().any(|r| r.len() != k) {
            return Err(Error::validation(format!(
                "group `{}` covariance must be {k}x{k}",
                g.label
            )));
        }
        let cov = DMatrix::from_row_iterator(k, k, g.cov.iter().flatten().copied());
        let root = linalg::sqrtm_psd(&cov)?;
        let mean = DVector::from_column_slice(&g.mean);
        let mut samples = DMatrix::zeros(g.n, k);
        for i in 0..g.n {
            let xi = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut rng)));
            let y = &mean + &root * xi;
            samples.set_row(i, &y.transpose());
        }
        if groups.insert(g.label.clone(), samples).is_some() {
            return Err(Error::validation(format!("duplicate group label `{}`", g.label)));
        }
    }
    GroupedDataset::new(groups)
}

/// Ascending sort of a one-column sample matrix.
pub fn sorted_quantiles(samples: &DMatrix<f64>) -> Result<Vec<f64>> {
    if samples.ncols() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: samples.ncols(),
        });
    }
    Ok(quantile::sorted_copy(samples.as_slice()))
}

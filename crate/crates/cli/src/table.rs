//! Row-aligned feature/outcome tables for the experiment pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use fairfront::{Error, GroupedDataset, Result};

#[derive(Debug, Clone)]
pub struct Table {
    pub features: DMatrix<f64>,
    pub outcomes: DMatrix<f64>,
    pub groups: Vec<String>,
}

impl Table {
    pub fn load(path: &Path, feature_cols: &[String], outcome_cols: &[String], group_col: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let fi: Vec<usize> = feature_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;
        let oi: Vec<usize> = outcome_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;
        let gi = find(group_col)?;

        let (mut xs, mut ys, mut groups) = (Vec::new(), Vec::new(), Vec::new());
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = r as u64 + 2;
            let cell = |i: usize, name: &str| -> Result<f64> {
                let raw = rec.get(i).unwrap_or("").trim();
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Parse {
                        row: line,
                        column: name.to_string(),
                        message: format!("`{raw}` is not a finite number"),
                    }),
                }
            };
            for (&i, name) in fi.iter().zip(feature_cols) {
                xs.push(cell(i, name)?);
            }
            for (&i, name) in oi.iter().zip(outcome_cols) {
                ys.push(cell(i, name)?);
            }
            groups.push(rec.get(gi).unwrap_or("").trim().to_string());
        }
        let n = groups.len();
        if n == 0 {
            return Err(Error::Validation("input has no data rows".into()));
        }
        Ok(Table {
            features: DMatrix::from_row_slice(n, fi.len(), &xs),
            outcomes: DMatrix::from_row_slice(n, oi.len(), &ys),
            groups,
        })
    }

    pub fn n(&self) -> usize {
        self.groups.len()
    }

    pub fn labels(&self) -> Vec<String> {
        let mut l = self.groups.clone();
        l.sort();
        l.dedup();
        l
    }

    /// Features with one indicator column per group except the first label.
    pub fn features_with_group(&self) -> DMatrix<f64> {
        let labels = self.labels();
        let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let (n, p) = self.features.shape();
        let extra = labels.len().saturating_sub(1);
        let mut m = DMatrix::zeros(n, p + extra);
        m.view_mut((0, 0), (n, p)).copy_from(&self.features);
        for (i, g) in self.groups.iter().enumerate() {
            let j = index[g.as_str()];
            if j > 0 {
                m[(i, p + j - 1)] = 1.0;
            }
        }
        m
    }

    /// Groups rows of `values` (`n × k`) by this table's labels.
    pub fn grouped(&self, values: &DMatrix<f64>) -> Result<GroupedDataset> {
        let k = values.ncols();
        GroupedDataset::from_rows(
            k,
            self.groups
                .iter()
                .enumerate()
                .map(|(i, g)| (g.clone(), values.row(i).iter().copied().collect::<Vec<_>>())),
        )
    }

    pub fn row(&self, m: &DMatrix<f64>, i: usize) -> DVector<f64> {
        m.row(i).transpose()
    }
}

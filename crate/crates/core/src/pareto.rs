//! Pareto frontier between L2 utility loss and Wasserstein disparity.
//!
//! For a tolerance `d`, the optimal transform moves every sample a fraction
//! `t = 1 − d / (√2 V)` of the way to its barycenter image:
//! `f_d(y, z) = (1 − t) y + t f*(y, z)`. For `d ≥ √2 V` the data are left
//! untouched.

use std::io::{Read, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::disparity::{wasserstein_disparity, DisparityMethod};
use crate::empirical::GroupedDataset;
use crate::error::{Error, Result};
use crate::transport::BarycenterModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub d: f64,
    pub t: f64,
    pub l2_loss: f64,
    pub measured_disparity: f64,
}

/// Interpolation time for tolerance `d` given projection loss `v`.
pub fn t_for_tolerance(v: f64, d: f64) -> Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::validation(format!("projection loss must be finite and >= 0, got {v}")));
    }
    if !(d >= 0.0) {
        return Err(Error::validation(format!("tolerance must be >= 0, got {d}")));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let scale = std::f64::consts::SQRT_2 * v;
    if d >= scale {
        return Ok(0.0);
    }
    Ok((1.0 - d / scale).clamp(0.0, 1.0))
}

/// McCann interpolation at time `t`: every sample goes to `(1 − t) y + t f*(y, z)`.
pub fn interpolate(ds: &GroupedDataset, model: &BarycenterModel, t: f64) -> Result<GroupedDataset> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::validation(format!("interpolation time {t} outside [0, 1]")));
    }
    model.check_compatible(ds).map_err(|e| Error::validation(e.to_string()))?;
    if t == 0.0 {
        return Ok(ds.clone());
    }
    let map = ParetoMap::at_time(model, t)?;
    ds.map_rows(|z, y| map.apply(&y, z))
}

/// `f_d` as a pointwise map, usable off-sample.
#[derive(Debug, Clone, Copy)]
pub struct ParetoMap<'a> {
    model: &'a BarycenterModel,
    t: f64,
}

impl<'a> ParetoMap<'a> {
    pub fn new(model: &'a BarycenterModel, d: f64) -> Result<Self> {
        Ok(ParetoMap {
            model,
            t: t_for_tolerance(model.projection_loss(), d)?,
        })
    }

    pub fn at_time(model: &'a BarycenterModel, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::validation(format!("interpolation time {t} outside [0, 1]")));
        }
        Ok(ParetoMap { model, t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn apply(&self, y: &DVector<f64>, z: &str) -> Result<DVector<f64>> {
        if self.t == 0.0 {
            if y.len() != self.model.dims() {
                return Err(Error::Dimension {
                    expected: self.model.dims(),
                    got: y.len(),
                });
            }
            return Ok(y.clone());
        }
        let target = self.model.apply(y, z)?;
        Ok(y * (1.0 - self.t) + target * self.t)
    }
}

/// Pareto-optimal transform `f_d` applied to `ds`.
pub fn transform(ds: &GroupedDataset, model: &BarycenterModel, d: f64) -> Result<GroupedDataset> {
    let t = t_for_tolerance(model.projection_loss(), d)?;
    interpolate(ds, model, t)
}

/// RMS of `‖a_i − b_i‖` over matching samples of two datasets.
pub fn l2_distance(a: &GroupedDataset, b: &GroupedDataset) -> Result<f64> {
    if a.dims() != b.dims() || a.total_n() != b.total_n() {
        return Err(Error::validation("datasets have different shapes"));
    }
    let mut sum = 0.0;
    for (label, ma) in a.iter() {
        let mb = b
            .group(label)
            .ok_or_else(|| Error::UnknownGroup(label.to_string()))?;
        if ma.shape() != mb.shape() {
            return Err(Error::validation(format!("group `{label}` has a different shape")));
        }
        sum += (ma - mb).norm_squared();
    }
    Ok((sum / a.total_n() as f64).sqrt())
}

/// Evaluates the frontier on an ascending grid of tolerances.
pub fn frontier(ds: &GroupedDataset, model: &BarycenterModel, d_grid: &[f64]) -> Result<Vec<ParetoPoint>> {
    frontier_with(ds, model, d_grid, DisparityMethod::for_variant(model.variant()))
}

pub fn frontier_with(
    ds: &GroupedDataset,
    model: &BarycenterModel,
    d_grid: &[f64],
    method: DisparityMethod,
) -> Result<Vec<ParetoPoint>> {
    if d_grid.is_empty() {
        return Err(Error::validation("tolerance grid is empty"));
    }
    if d_grid.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::validation("tolerances must be finite and >= 0"));
    }
    if d_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::validation("tolerance grid must be ascending"));
    }
    d_grid
        .iter()
        .map(|&d| {
            let t = t_for_tolerance(model.projection_loss(), d)?;
            let moved = interpolate(ds, model, t)?;
            Ok(ParetoPoint {
                d,
                t,
                l2_loss: l2_distance(ds, &moved)?,
                measured_disparity: wasserstein_disparity(&moved, method)?.disparity,
            })
        })
        .collect()
}

/// Writes points as CSV with header `d,t,l2_loss,measured_disparity`.
pub fn write_frontier_csv<W: Write>(points: &[ParetoPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["d", "t", "l2_loss", "measured_disparity"])?;
    for p in points {
        w.write_record([
            format!("{}", p.d),
            format!("{}", p.t),
            format!("{}", p.l2_loss),
            format!("{}", p.measured_disparity),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frontier_csv<R: Read>(reader: R) -> Result<Vec<ParetoPoint>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

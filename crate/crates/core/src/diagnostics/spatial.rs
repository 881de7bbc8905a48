use serde::Serialize;

use super::correlation::{pacf, CorrelationCurve};
use crate::error::{Error, Result};
use crate::eval::time_averaged_map;
use crate::ingest::SpatioTemporalGrid;
use crate::matrix::Matrix;

/// Number of densest slices kept by [`SliceScope::TopSlices`].
pub const TOP_SLICES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Along columns: each grid row is one series.
    X,
    /// Along rows: each grid column is one series.
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceScope {
    All,
    /// The [`TOP_SLICES`] slices with the largest total count.
    TopSlices,
}

/// Spatial PACF of the time-averaged count map along one axis.
///
/// Every row (x axis) or column (y axis) of the map is treated as a series;
/// the per-slice PACFs are averaged with weights equal to the slice totals.
/// Constant slices are skipped. The band is `z / sqrt(L)` for slice length `L`.
pub fn spatial_pacf(
    grid: &SpatioTemporalGrid,
    axis: Axis,
    scope: SliceScope,
    max_lag: usize,
    alpha: f64,
) -> Result<CorrelationCurve> {
    let map = time_averaged_map(grid, 0..grid.spec.t_steps)?;
    spatial_pacf_of_map(&map, axis, scope, max_lag, alpha)
}

pub fn spatial_pacf_of_map(
    map: &Matrix,
    axis: Axis,
    scope: SliceScope,
    max_lag: usize,
    alpha: f64,
) -> Result<CorrelationCurve> {
    let slices: Vec<Vec<f64>> = match axis {
        Axis::X => (0..map.rows).map(|r| map.row(r).to_vec()).collect(),
        Axis::Y => (0..map.cols).map(|c| map.column(c)).collect(),
    };
    let len = slices.first().map_or(0, Vec::len);
    if len < 8 {
        return Err(Error::InvalidGrid(format!(
            "need at least 8 cells along the axis, have {len}"
        )));
    }
    let mut ranked: Vec<(f64, &Vec<f64>)> = slices.iter().map(|s| (s.iter().sum(), s)).collect();
    if scope == SliceScope::TopSlices {
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        ranked.truncate(TOP_SLICES);
    }

    let mut acc = vec![0.0; max_lag + 1];
    let mut weight = 0.0;
    let mut template = None;
    for (total, slice) in ranked {
        let curve = match pacf(slice, max_lag, alpha) {
            Ok(c) => c,
            Err(Error::ZeroVariance) => continue,
            Err(e) => return Err(e),
        };
        let w = total.max(0.0);
        for (a, v) in acc.iter_mut().zip(&curve.values) {
            *a += w * v;
        }
        weight += w;
        template.get_or_insert(curve);
    }
    let mut curve = template.ok_or_else(|| Error::InvalidGrid("every slice is constant".into()))?;
    if weight <= 0.0 {
        return Err(Error::InvalidGrid("slices carry no counts".into()));
    }
    curve.values = acc.into_iter().map(|a| a / weight).collect();
    curve.values[0] = 1.0;
    Ok(curve)
}

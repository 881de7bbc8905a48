//! Prediction metrics and map-level comparisons.
//!
//! MAPE divides by `max(target, epsilon)`, so zero-count targets contribute
//! `|o| / epsilon` and dominate the mean: a single over-predicted empty cell
//! with the default `epsilon = 1e-7` adds roughly `1e7 / n`.

use std::io::Write;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::SpatioTemporalGrid;
use crate::matrix::Matrix;

pub const DEFAULT_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub mse: f64,
    pub mape: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
    pub n: usize,
    pub epsilon_used: f64,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let r2 = self
            .r2
            .map_or_else(|| "undefined".to_string(), |v| v.to_string());
        format!(
            "mse,mape,r2,n,epsilon\n{},{},{},{},{}\n",
            self.mse, self.mape, r2, self.n, self.epsilon_used
        )
    }
}

pub fn metrics(predictions: &[f64], targets: &[f64], epsilon: f64) -> Result<EvalReport> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            actual: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no predictions to evaluate".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    let mut ape = 0.0;
    for (&o, &t) in predictions.iter().zip(targets) {
        sse += (t - o).powi(2);
        sst += (t - mean).powi(2);
        ape += (t - o).abs() / t.max(epsilon);
    }
    Ok(EvalReport {
        mse: sse / n,
        mape: ape / n,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        n: targets.len(),
        epsilon_used: epsilon,
    })
}

/// Per-cell mean count over a range of steps.
pub fn time_averaged_map(grid: &SpatioTemporalGrid, t_range: Range<usize>) -> Result<Matrix> {
    if t_range.is_empty() || t_range.end > grid.spec.t_steps {
        return Err(Error::InvalidParameter(format!(
            "time range {t_range:?} is empty or exceeds {} steps",
            grid.spec.t_steps
        )));
    }
    let (rows, cols) = (grid.spec.rows, grid.spec.cols);
    let mut map = Matrix::zeros(rows, cols);
    let k = t_range.len() as f64;
    for t in t_range {
        for (acc, &v) in map.data.iter_mut().zip(grid.counts.slice(t)) {
            *acc += v as f64;
        }
    }
    map.data.iter_mut().for_each(|v| *v /= k);
    Ok(map)
}

/// `actual - predicted`; positive cells are under-estimated.
pub fn diff_map(actual: &Matrix, predicted: &Matrix) -> Result<Matrix> {
    if !actual.same_shape(predicted) {
        return Err(Error::DimensionMismatch {
            expected: actual.data.len(),
            actual: predicted.data.len(),
        });
    }
    let data = actual
        .data
        .iter()
        .zip(&predicted.data)
        .map(|(a, p)| a - p)
        .collect();
    Ok(Matrix {
        rows: actual.rows,
        cols: actual.cols,
        data,
    })
}

/// Scales `source` so its maximum equals the maximum of `reference`.
pub fn rescale_to_max(source: &Matrix, reference: &Matrix) -> Result<Matrix> {
    let smax = source.max();
    if !(smax > 0.0) {
        return Err(Error::InvalidParameter(
            "source map has no positive cell".into(),
        ));
    }
    let rmax = reference.max();
    let mut out = source.clone();
    let k = rmax / smax;
    out.data.iter_mut().for_each(|v| *v *= k);
    // Pin the peak so max equality is exact despite rounding.
    if let Some(i) = source.data.iter().position(|&v| v == smax) {
        out.data[i] = rmax;
    }
    Ok(out)
}

/// Writes a binary grayscale PGM, darkest at the minimum. Row 0 of the map
/// (the southern edge) is drawn at the bottom.
pub fn write_pgm<W: Write>(map: &Matrix, mut w: W) -> Result<()> {
    let (lo, hi) = (map.min(), map.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(w, "P5\n{} {}\n255\n", map.cols, map.rows)?;
    let mut buf = Vec::with_capacity(map.data.len());
    for r in (0..map.rows).rev() {
        buf.extend(
            map.row(r)
                .iter()
                .map(|v| (((v - lo) / span) * 255.0).round() as u8),
        );
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Writes a binary PPM with a blue-white-red diverging palette symmetric
/// about zero: red cells are positive (under-estimated), blue negative.
pub fn write_diverging_ppm<W: Write>(map: &Matrix, mut w: W) -> Result<()> {
    let scale = map.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    write!(w, "P6\n{} {}\n255\n", map.cols, map.rows)?;
    let mut buf = Vec::with_capacity(map.data.len() * 3);
    for r in (0..map.rows).rev() {
        for &v in map.row(r) {
            let x = (v / scale).clamp(-1.0, 1.0);
            let fade = (255.0 * (1.0 - x.abs())).round() as u8;
            let px = if x >= 0.0 {
                [255, fade, fade]
            } else {
                [fade, fade, 255]
            };
            buf.extend_from_slice(&px);
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::projection::{project_coords, Crs};
use super::records::EventRecord;
use crate::error::{Error, Result};

/// Largest tolerated relative difference between cell width and height.
pub const SQUARE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeResolution {
    Monthly,
    Daily,
}

impl TimeResolution {
    pub fn steps_per_year(self) -> usize {
        match self {
            TimeResolution::Monthly => 12,
            TimeResolution::Daily => 365,
        }
    }

    /// 0-based step of `date` relative to `start`; negative when earlier.
    pub fn step_index(self, start: NaiveDate, date: NaiveDate) -> i64 {
        match self {
            TimeResolution::Monthly => {
                (date.year() as i64 - start.year() as i64) * 12 + date.month() as i64
                    - start.month() as i64
            }
            TimeResolution::Daily => (date - start).num_days(),
        }
    }
}

/// Geometry and extent of a spatiotemporal histogram.
///
/// Row 0 is the southernmost row and column 0 the westernmost column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// South-west corner (easting_km, northing_km).
    pub origin: (f64, f64),
    /// (width_km, height_km).
    pub cell_size: (f64, f64),
    pub t_steps: usize,
    pub t_resolution: TimeResolution,
    pub crs: Crs,
    #[serde(default)]
    pub t_start: Option<NaiveDate>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.t_steps == 0 {
            return Err(Error::InvalidGrid(
                "rows, cols and t_steps must be positive".into(),
            ));
        }
        let (w, h) = self.cell_size;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidGrid("cell sides must be positive".into()));
        }
        if (w - h).abs() / w > SQUARE_TOLERANCE {
            return Err(Error::InvalidGrid(format!(
                "cells of {w:.4} x {h:.4} km are not near-square"
            )));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size.0,
            self.origin.1 + (row as f64 + 0.5) * self.cell_size.1,
        )
    }

    fn x_edge(&self, i: usize) -> f64 {
        self.origin.0 + i as f64 * self.cell_size.0
    }

    fn y_edge(&self, i: usize) -> f64 {
        self.origin.1 + i as f64 * self.cell_size.1
    }

    /// Cell containing a projected point. Bins are closed on the low side and
    /// open on the high side, except the last row/column which also include
    /// the extent's upper edge.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let col = bin(x, self.cols, |i| self.x_edge(i))?;
        let row = bin(y, self.rows, |i| self.y_edge(i))?;
        Some((row, col))
    }
}

fn bin(v: f64, n: usize, edge: impl Fn(usize) -> f64) -> Option<usize> {
    if !v.is_finite() || v < edge(0) || v > edge(n) {
        return None;
    }
    // First edge strictly greater than v, minus one.
    let (mut lo, mut hi) = (0usize, n + 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if edge(mid) <= v {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    Some((lo - 1).min(n - 1))
}

/// Projected bounding box in kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Extent {
    pub fn from_points(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Extent> {
        let mut it = points.into_iter();
        let (x0, y0) = it.next()?;
        let mut e = Extent {
            min_x: x0,
            min_y: y0,
            max_x: x0,
            max_y: y0,
        };
        for (x, y) in it {
            e.min_x = e.min_x.min(x);
            e.min_y = e.min_y.min(y);
            e.max_x = e.max_x.max(x);
            e.max_y = e.max_y.max(y);
        }
        Some(e)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

fn cell_mismatch(width: f64, height: f64, rows: usize, cols: usize) -> f64 {
    let w = width / cols as f64;
    let h = height / rows as f64;
    (w - h).abs() / w
}

/// Picks near-square grid dimensions `(rows, cols)` for an extent.
///
/// Starting from an `seed_n` x `seed_n` grid, the ratio of the per-axis cell
/// sizes is approximated by a small integer pair, the pair is scaled so its
/// mean is close to `seed_n`, and single-bin adjustments are then applied
/// greedily while they bring cell width and height closer together.
pub fn compute_grid_dims(extent: &Extent, seed_n: usize) -> Result<(usize, usize)> {
    let (width, height) = (extent.width(), extent.height());
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(Error::DegenerateExtent(format!("{width} x {height} km")));
    }
    if seed_n == 0 {
        return Err(Error::InvalidParameter(
            "seed grid size must be positive".into(),
        ));
    }

    // With an N x N start, cell width / cell height = width / height.
    let ratio = width / height;
    let mut best = (1usize, 1usize);
    let mut best_err = f64::INFINITY;
    for q in 1..=5usize {
        for p in 1..=5usize {
            let err = (p as f64 / q as f64 - ratio).abs();
            if err < best_err - 1e-12 {
                best_err = err;
                best = (p, q);
            }
        }
    }
    let (p, q) = best;
    let scale = ((2 * seed_n) as f64 / (p + q) as f64).round().max(1.0) as usize;
    let (mut rows, mut cols) = (q * scale, p * scale);

    for _ in 0..10_000 {
        let current = cell_mismatch(width, height, rows, cols);
        if current <= 0.01 {
            break;
        }
        let candidates = [
            (rows + 1, cols),
            (rows, cols + 1),
            (rows.saturating_sub(1), cols),
            (rows, cols.saturating_sub(1)),
        ];
        let next = candidates
            .into_iter()
            .filter(|&(r, c)| r > 0 && c > 0)
            .map(|(r, c)| (cell_mismatch(width, height, r, c), r, c))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        match next {
            Some((m, r, c)) if m < current => {
                rows = r;
                cols = c;
            }
            _ => break,
        }
    }

    if cell_mismatch(width, height, rows, cols) > SQUARE_TOLERANCE {
        return Err(Error::DegenerateExtent(format!(
            "no near-square grid found for {width:.3} x {height:.3} km"
        )));
    }
    Ok((rows, cols))
}

/// Dense `[t][row][col]` tensor of non-negative counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTensor {
    pub t_steps: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u32>,
}

impl CountTensor {
    pub fn zeros(t_steps: usize, rows: usize, cols: usize) -> Self {
        CountTensor {
            t_steps,
            rows,
            cols,
            data: vec![0; t_steps * rows * cols],
        }
    }

    #[inline]
    pub fn index(&self, t: usize, r: usize, c: usize) -> usize {
        (t * self.rows + r) * self.cols + c
    }

    #[inline]
    pub fn get(&self, t: usize, r: usize, c: usize) -> u32 {
        self.data[self.index(t, r, c)]
    }

    #[inline]
    pub fn get_mut(&mut self, t: usize, r: usize, c: usize) -> &mut u32 {
        let i = self.index(t, r, c);
        &mut self.data[i]
    }

    /// Row-major `rows x cols` slice at step `t`.
    pub fn slice(&self, t: usize) -> &[u32] {
        let n = self.rows * self.cols;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn total(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    fn same_shape(&self, other: &CountTensor) -> bool {
        self.t_steps == other.t_steps && self.rows == other.rows && self.cols == other.cols
    }
}

/// Total and per-category event counts on a regular space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalGrid {
    pub spec: GridSpec,
    pub counts: CountTensor,
    pub per_type: BTreeMap<String, CountTensor>,
}

impl SpatioTemporalGrid {
    /// Builds a grid from per-category tensors; the total is their sum.
    pub fn from_types(spec: GridSpec, per_type: BTreeMap<String, CountTensor>) -> Result<Self> {
        spec.validate()?;
        let mut counts = CountTensor::zeros(spec.t_steps, spec.rows, spec.cols);
        for (name, tensor) in &per_type {
            if !counts.same_shape(tensor) {
                return Err(Error::InvalidGrid(format!(
                    "tensor for `{name}` has the wrong shape"
                )));
            }
            for (acc, &v) in counts.data.iter_mut().zip(&tensor.data) {
                *acc = acc
                    .checked_add(v)
                    .ok_or_else(|| Error::InvalidGrid("count overflow".into()))?;
            }
        }
        Ok(SpatioTemporalGrid {
            spec,
            counts,
            per_type,
        })
    }

    /// Checks every structural invariant, including per-type consistency.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let expected = CountTensor::zeros(self.spec.t_steps, self.spec.rows, self.spec.cols);
        if !self.counts.same_shape(&expected) {
            return Err(Error::InvalidGrid(
                "total tensor shape differs from spec".into(),
            ));
        }
        if self.per_type.is_empty() {
            return Ok(());
        }
        let rebuilt = SpatioTemporalGrid::from_types(self.spec.clone(), self.per_type.clone())?;
        if rebuilt.counts != self.counts {
            return Err(Error::InvalidGrid(
                "total differs from the sum of per-type counts".into(),
            ));
        }
        Ok(())
    }

    pub fn type_names(&self) -> Vec<&str> {
        self.per_type.keys().map(String::as_str).collect()
    }

    pub fn n_types(&self) -> usize {
        self.per_type.len()
    }

    /// Per-type counts at one cell, in type-name order.
    pub fn type_vector(&self, t: usize, r: usize, c: usize) -> Vec<f64> {
        self.per_type
            .values()
            .map(|x| x.get(t, r, c) as f64)
            .collect()
    }

    /// City-wide total per time step.
    pub fn total_series(&self) -> Vec<f64> {
        (0..self.spec.t_steps)
            .map(|t| self.counts.slice(t).iter().map(|&v| v as f64).sum())
            .collect()
    }

    /// Time series of a single cell.
    pub fn cell_series(&self, r: usize, c: usize) -> Vec<f64> {
        (0..self.spec.t_steps)
            .map(|t| self.counts.get(t, r, c) as f64)
            .collect()
    }

    /// One step as a comma-separated `rows x cols` matrix, row 0 first.
    pub fn step_csv(&self, t: usize) -> String {
        let mut out = String::new();
        for row in self.counts.slice(t).chunks(self.spec.cols) {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes the binary grid container.
    ///
    /// Layout: the 8-byte magic `GTWGRID1`, a little-endian `u32` header
    /// length, a JSON header `{"spec": GridSpec, "types": [names]}`, then the
    /// total tensor followed by each per-type tensor in header order. Tensors
    /// are row-major `[t][row][col]` little-endian `u32`.
    pub fn write_container<W: Write>(&self, mut w: W) -> Result<()> {
        let header = ContainerHeader {
            spec: self.spec.clone(),
            types: self.per_type.keys().cloned().collect(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        write_tensor(&mut w, &self.counts)?;
        for tensor in self.per_type.values() {
            write_tensor(&mut w, tensor)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_container<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::Format("not a grid container".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: ContainerHeader = serde_json::from_slice(&json)?;
        header.spec.validate()?;
        let (t, rows, cols) = (header.spec.t_steps, header.spec.rows, header.spec.cols);
        let counts = read_tensor(&mut r, t, rows, cols)?;
        let mut per_type = BTreeMap::new();
        for name in header.types {
            per_type.insert(name, read_tensor(&mut r, t, rows, cols)?);
        }
        let grid = SpatioTemporalGrid {
            spec: header.spec,
            counts,
            per_type,
        };
        grid.validate()?;
        Ok(grid)
    }
}

const GRID_MAGIC: &[u8; 8] = b"GTWGRID1";

#[derive(Serialize, Deserialize)]
struct ContainerHeader {
    spec: GridSpec,
    types: Vec<String>,
}

fn write_tensor<W: Write>(w: &mut W, t: &CountTensor) -> Result<()> {
    let mut buf = Vec::with_capacity(t.data.len() * 4);
    for v in &t.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R, t: usize, rows: usize, cols: usize) -> Result<CountTensor> {
    let n = t * rows * cols;
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    let data = buf
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(CountTensor {
        t_steps: t,
        rows,
        cols,
        data,
    })
}

#[derive(Debug, Clone)]
pub struct HistogramOutcome {
    pub grid: SpatioTemporalGrid,
    /// Events outside the spatial extent, the time span, or the CRS zone.
    pub out_of_extent: usize,
}

/// Histograms events into total and per-type tensors.
pub fn histogram(records: &[EventRecord], spec: &GridSpec) -> Result<HistogramOutcome> {
    spec.validate()?;
    let start = spec
        .t_start
        .ok_or_else(|| Error::InvalidGrid("grid has no start date".into()))?;
    let mut per_type: BTreeMap<String, CountTensor> = BTreeMap::new();
    let mut out_of_extent = 0usize;
    for rec in records {
        let Ok((x, y)) = project_coords(rec.longitude, rec.latitude, spec.crs) else {
            out_of_extent += 1;
            continue;
        };
        let t = spec.t_resolution.step_index(start, rec.date);
        let cell = spec.locate(x, y);
        match cell {
            Some((r, c)) if t >= 0 && (t as usize) < spec.t_steps => {
                let tensor = per_type
                    .entry(rec.crime_type.clone())
                    .or_insert_with(|| CountTensor::zeros(spec.t_steps, spec.rows, spec.cols));
                *tensor.get_mut(t as usize, r, c) += 1;
            }
            _ => out_of_extent += 1,
        }
    }
    if out_of_extent > 0 {
        log::info!("{out_of_extent} events fell outside the grid extent");
    }
    let grid = SpatioTemporalGrid::from_types(spec.clone(), per_type)?;
    Ok(HistogramOutcome {
        grid,
        out_of_extent,
    })
}

/// Fits a grid spec around a set of records: projected bounding box, near-square
/// dimensions from `seed_n`, and the time span at the chosen resolution.
pub fn fit_grid_spec(
    records: &[EventRecord],
    crs: Crs,
    resolution: TimeResolution,
    seed_n: usize,
) -> Result<GridSpec> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| project_coords(r.longitude, r.latitude, crs).ok())
        .collect();
    let extent = Extent::from_points(points)
        .ok_or_else(|| Error::DegenerateExtent("no projectable records".into()))?;
    let (rows, cols) = compute_grid_dims(&extent, seed_n)?;
    let first = records.iter().map(|r| r.date).min().expect("non-empty");
    let last = records.iter().map(|r| r.date).max().expect("non-empty");
    let start = match resolution {
        TimeResolution::Monthly => first.with_day(1).expect("day 1 exists"),
        TimeResolution::Daily => first,
    };
    let t_steps = resolution.step_index(start, last) as usize + 1;
    Ok(GridSpec {
        rows,
        cols,
        origin: (extent.min_x, extent.min_y),
        cell_size: (extent.width() / cols as f64, extent.height() / rows as f64),
        t_steps,
        t_resolution: resolution,
        crs,
        t_start: Some(start),
    })
}

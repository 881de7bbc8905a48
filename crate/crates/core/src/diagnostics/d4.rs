use serde::Serialize;

use crate::ingest::{CountTensor, GridSpec, SpatioTemporalGrid};
use crate::matrix::Matrix;

/// The eight distance-preserving symmetries of a square lattice.
///
/// Mirrors are built from transposition and counter-clockwise rotation:
/// vertical = transpose then Rot(90), horizontal = transpose then Rot(270),
/// diagonal = transpose, off-diagonal = transpose then Rot(180).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum D4 {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    VerticalMirror,
    HorizontalMirror,
    DiagonalMirror,
    OffDiagonalMirror,
}

impl D4 {
    pub const ALL: [D4; 8] = [
        D4::Identity,
        D4::Rot90,
        D4::Rot180,
        D4::Rot270,
        D4::VerticalMirror,
        D4::HorizontalMirror,
        D4::DiagonalMirror,
        D4::OffDiagonalMirror,
    ];

    /// (transpose first?, number of quarter turns).
    fn recipe(self) -> (bool, usize) {
        match self {
            D4::Identity => (false, 0),
            D4::Rot90 => (false, 1),
            D4::Rot180 => (false, 2),
            D4::Rot270 => (false, 3),
            D4::VerticalMirror => (true, 1),
            D4::HorizontalMirror => (true, 3),
            D4::DiagonalMirror => (true, 0),
            D4::OffDiagonalMirror => (true, 2),
        }
    }

    /// Applies the symmetry to a row-major `h x w` buffer.
    pub fn apply_raw<T: Copy>(self, data: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
        let (transpose_first, turns) = self.recipe();
        let (mut buf, mut h, mut w) = (data.to_vec(), h, w);
        if transpose_first {
            (buf, h, w) = transpose(&buf, h, w);
        }
        for _ in 0..turns {
            (buf, h, w) = rot90(&buf, h, w);
        }
        (buf, h, w)
    }

    pub fn apply(self, m: &Matrix) -> Matrix {
        let (data, rows, cols) = self.apply_raw(&m.data, m.rows, m.cols);
        Matrix { rows, cols, data }
    }
}

/// Matrix transpose.
pub fn transpose<T: Copy>(data: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
    let out = (0..w * h).map(|k| data[(k % h) * w + k / h]).collect();
    (out, w, h)
}

/// Counter-clockwise quarter turn: `out[i][j] = in[j][w - 1 - i]`.
pub fn rot90<T: Copy>(data: &[T], h: usize, w: usize) -> (Vec<T>, usize, usize) {
    let out = (0..w * h)
        .map(|k| {
            let (i, j) = (k / h, k % h);
            data[j * w + (w - 1 - i)]
        })
        .collect();
    (out, w, h)
}

/// All eight images of a map, identity first.
pub fn d4_transforms(map: &Matrix) -> Vec<(D4, Matrix)> {
    D4::ALL.iter().map(|&t| (t, t.apply(map))).collect()
}

/// Applies a symmetry to every time slice of a grid. Quarter turns swap the
/// row and column counts and the cell sides.
pub fn transform_grid(grid: &SpatioTemporalGrid, t: D4) -> SpatioTemporalGrid {
    let spec = &grid.spec;
    let map_tensor = |src: &CountTensor| {
        let mut data = Vec::with_capacity(src.data.len());
        let (mut rows, mut cols) = (src.rows, src.cols);
        for step in 0..src.t_steps {
            let (d, h, w) = t.apply_raw(src.slice(step), src.rows, src.cols);
            data.extend(d);
            (rows, cols) = (h, w);
        }
        CountTensor {
            t_steps: src.t_steps,
            rows,
            cols,
            data,
        }
    };
    let counts = map_tensor(&grid.counts);
    let (transposed, turns) = t.recipe();
    let cell_size = if transposed ^ (turns % 2 == 1) {
        (spec.cell_size.1, spec.cell_size.0)
    } else {
        spec.cell_size
    };
    SpatioTemporalGrid {
        spec: GridSpec {
            rows: counts.rows,
            cols: counts.cols,
            cell_size,
            ..spec.clone()
        },
        counts,
        per_type: grid
            .per_type
            .iter()
            .map(|(k, v)| (k.clone(), map_tensor(v)))
            .collect(),
    }
}

/// The original grid plus its seven symmetric images.
pub fn augment_grid(grid: &SpatioTemporalGrid) -> Vec<SpatioTemporalGrid> {
    D4::ALL.iter().map(|&t| transform_grid(grid, t)).collect()
}

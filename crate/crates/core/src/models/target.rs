use super::arch::{ArchKind, OutputShape};
use crate::error::{Error, Result};
use crate::ingest::{Sample, SpatioTemporalGrid};

/// Target neighbourhood of one sample.
///
/// Entries are ordered time-major (`t-1, t, t+1` for the 27-block), then
/// row-major by grid row index, then column: entry `(dt, dr, dc)` with
/// offsets in `-1..=1` sits at `9*(dt+1) + 3*(dr+1) + (dc+1)` (spatial
/// blocks drop the time term). The center is index 4 of 9 and 13 of 27.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBlock {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub distances: Vec<f64>,
    /// Step offsets; empty for scalar and spatial blocks.
    pub time_offsets: Vec<f64>,
}

impl TargetBlock {
    pub fn scalar(value: f64) -> Self {
        TargetBlock {
            values: vec![value],
            mask: vec![true],
            distances: vec![0.0],
            time_offsets: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn center(&self) -> f64 {
        self.values[self.values.len() / 2]
    }

    /// Copy with only the center entry left unmasked.
    pub fn center_only(&self) -> Self {
        let c = self.len() / 2;
        let mut out = self.clone();
        out.mask
            .iter_mut()
            .enumerate()
            .for_each(|(i, m)| *m = i == c);
        out
    }
}

pub fn assemble_target(
    grid: &SpatioTemporalGrid,
    t: usize,
    row: usize,
    col: usize,
    kind: ArchKind,
) -> Result<TargetBlock> {
    let spec = &grid.spec;
    if t >= spec.t_steps || row >= spec.rows || col >= spec.cols {
        return Err(Error::InvalidParameter(format!(
            "({t}, {row}, {col}) is outside the {}x{}x{} grid",
            spec.t_steps, spec.rows, spec.cols
        )));
    }
    let shape = kind.output_shape();
    if shape == OutputShape::Scalar {
        return Ok(TargetBlock::scalar(grid.counts.get(t, row, col) as f64));
    }
    let time_span: &[i64] = match shape {
        OutputShape::Spatiotemporal => &[-1, 0, 1],
        _ => &[0],
    };
    let (w, h) = spec.cell_size;
    let n = shape.width();
    let mut block = TargetBlock {
        values: Vec::with_capacity(n),
        mask: Vec::with_capacity(n),
        distances: Vec::with_capacity(n),
        time_offsets: Vec::new(),
    };
    for &dt in time_span {
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (tt, rr, cc) = (t as i64 + dt, row as i64 + dr, col as i64 + dc);
                let inside = tt >= 0
                    && (tt as usize) < spec.t_steps
                    && rr >= 0
                    && (rr as usize) < spec.rows
                    && cc >= 0
                    && (cc as usize) < spec.cols;
                let value = if inside {
                    grid.counts.get(tt as usize, rr as usize, cc as usize) as f64
                } else {
                    0.0
                };
                block.values.push(value);
                block.mask.push(inside);
                block
                    .distances
                    .push(((dc as f64 * w).powi(2) + (dr as f64 * h).powi(2)).sqrt());
                if shape == OutputShape::Spatiotemporal {
                    block.time_offsets.push(dt as f64);
                }
            }
        }
    }
    Ok(block)
}

/// A sample joined with its target block, ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub t: usize,
    pub row: usize,
    pub col: usize,
    pub input: [f64; 3],
    /// `(1, EF)` one step back.
    pub ef_t: Vec<f64>,
    /// `(1, EF)` two steps back.
    pub ef_tm1: Vec<f64>,
    pub block: TargetBlock,
}

impl PreparedSample {
    pub fn from_sample(s: &Sample, block: TargetBlock) -> Self {
        let with_one = |v: &[f64]| std::iter::once(1.0).chain(v.iter().copied()).collect();
        PreparedSample {
            t: s.t,
            row: s.row,
            col: s.col,
            input: s.input,
            ef_t: with_one(&s.ef_t),
            ef_tm1: with_one(&s.ef_tm1),
            block,
        }
    }

    pub fn target(&self) -> f64 {
        self.block.center()
    }
}

pub fn prepare(
    grid: &SpatioTemporalGrid,
    samples: &[Sample],
    kind: ArchKind,
) -> Result<Vec<PreparedSample>> {
    samples
        .iter()
        .map(|s| {
            Ok(PreparedSample::from_sample(
                s,
                assemble_target(grid, s.t, s.row, s.col, kind)?,
            ))
        })
        .collect()
}

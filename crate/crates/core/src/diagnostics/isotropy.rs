use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::d4::D4;
use crate::error::{Error, Result};
use crate::ingest::SpatioTemporalGrid;
use crate::matrix::Matrix;

pub const DEFAULT_WINDOW: usize = 7;
pub const DEFAULT_SAMPLE_FRAC: f64 = 0.25;
pub const DEFAULT_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotropyReport {
    /// Sum of the sampled per-cell neighbour correlation windows.
    #[serde(skip)]
    pub aggregated_grid: Matrix,
    /// `||A - T(A)|| / ||A||` for each non-identity symmetry `T`.
    pub symmetry_deviations: BTreeMap<String, f64>,
    pub isotropic: bool,
    pub threshold: f64,
    pub cells_sampled: usize,
}

impl IsotropyReport {
    pub fn max_deviation(&self) -> f64 {
        self.symmetry_deviations
            .values()
            .copied()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropyConfig {
    pub window: usize,
    pub sample_frac: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for IsotropyConfig {
    fn default() -> Self {
        IsotropyConfig {
            window: DEFAULT_WINDOW,
            sample_frac: DEFAULT_SAMPLE_FRAC,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

/// Standardised copy of a series, or `None` when it is constant.
fn standardise(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    (sd > 0.0).then(|| x.iter().map(|v| (v - mean) / sd).collect())
}

/// Tests whether neighbour correlations are invariant under the D4 group.
///
/// For a seeded fraction of the cells whose full window fits inside the
/// grid, the Pearson correlation of the cell's time series with every
/// neighbour in the window is computed; the windows are summed and the sum
/// is compared with each of its seven symmetric images. Constant series
/// contribute zero correlation.
pub fn isotropy_test(grid: &SpatioTemporalGrid, cfg: &IsotropyConfig) -> Result<IsotropyReport> {
    let (rows, cols) = (grid.spec.rows, grid.spec.cols);
    let w = cfg.window;
    if w == 0 || w % 2 == 0 {
        return Err(Error::InvalidParameter(
            "window must be a positive odd size".into(),
        ));
    }
    if w > rows || w > cols {
        return Err(Error::InvalidParameter(format!(
            "window {w} exceeds the {rows}x{cols} grid"
        )));
    }
    if !(cfg.sample_frac > 0.0 && cfg.sample_frac <= 1.0) {
        return Err(Error::InvalidParameter(
            "sample fraction must lie in (0, 1]".into(),
        ));
    }
    let half = w / 2;
    let series: Vec<Option<Vec<f64>>> = (0..rows * cols)
        .map(|i| standardise(&grid.cell_series(i / cols, i % cols)))
        .collect();
    let t = grid.spec.t_steps as f64;

    let interior: Vec<(usize, usize)> = (half..rows - half)
        .flat_map(|r| (half..cols - half).map(move |c| (r, c)))
        .collect();
    let n_pick =
        ((interior.len() as f64 * cfg.sample_frac).ceil() as usize).clamp(1, interior.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked: Vec<usize> = sample(&mut rng, interior.len(), n_pick).into_vec();
    picked.sort_unstable();

    let mut agg = Matrix::zeros(w, w);
    for &k in &picked {
        let (r, c) = interior[k];
        let Some(center) = &series[r * cols + c] else {
            continue;
        };
        for i in 0..w {
            for j in 0..w {
                let (rr, cc) = (r + i - half, c + j - half);
                if let Some(other) = &series[rr * cols + cc] {
                    let corr = center.iter().zip(other).map(|(a, b)| a * b).sum::<f64>() / t;
                    agg.data[i * w + j] += corr;
                }
            }
        }
    }

    let norm = agg.frobenius();
    let mut symmetry_deviations = BTreeMap::new();
    for tr in D4::ALL.into_iter().skip(1) {
        let image = tr.apply(&agg);
        let diff: f64 = agg
            .data
            .iter()
            .zip(&image.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let dev = if norm > 0.0 { diff / norm } else { 0.0 };
        symmetry_deviations.insert(format!("{tr:?}"), dev);
    }
    let max_dev = symmetry_deviations.values().copied().fold(0.0, f64::max);
    Ok(IsotropyReport {
        aggregated_grid: agg,
        symmetry_deviations,
        isotropic: max_dev <= cfg.threshold,
        threshold: cfg.threshold,
        cells_sampled: picked.len(),
    })
}

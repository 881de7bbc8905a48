use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grid::{SpatioTemporalGrid, TimeResolution};
use crate::error::{Error, Result};

/// One training row keyed by its grid coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: usize,
    pub row: usize,
    pub col: usize,
    /// (easting_km, northing_km, t) of the cell center.
    pub input: [f64; 3],
    /// Per-type counts one step before `t`.
    pub ef_t: Vec<f64>,
    /// Per-type counts two steps before `t`.
    pub ef_tm1: Vec<f64>,
    /// Total count at `(t, row, col)`.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub t_steps: usize,
    pub t_resolution: TimeResolution,
    pub n_types: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Dataset {
        Dataset {
            samples,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DatasetOptions {
    /// Leave out cells whose total count is zero over the whole span, e.g.
    /// cells of the bounding box that fall outside the study area.
    pub skip_inactive_cells: bool,
}

pub fn build_dataset(grid: &SpatioTemporalGrid) -> Result<Dataset> {
    build_dataset_with(grid, DatasetOptions::default())
}

pub fn build_dataset_with(grid: &SpatioTemporalGrid, opts: DatasetOptions) -> Result<Dataset> {
    let spec = &grid.spec;
    if spec.t_steps < 3 {
        return Err(Error::InvalidGrid(format!(
            "need at least 3 time steps, grid has {}",
            spec.t_steps
        )));
    }
    let active: Vec<bool> = (0..spec.rows * spec.cols)
        .map(|i| {
            !opts.skip_inactive_cells || (0..spec.t_steps).any(|t| grid.counts.slice(t)[i] > 0)
        })
        .collect();

    let mut samples = Vec::with_capacity((spec.t_steps - 2) * spec.n_cells());
    for t in 2..spec.t_steps {
        for row in 0..spec.rows {
            for col in 0..spec.cols {
                if !active[row * spec.cols + col] {
                    continue;
                }
                let (x, y) = spec.cell_center(row, col);
                samples.push(Sample {
                    t,
                    row,
                    col,
                    input: [x, y, t as f64],
                    ef_t: grid.type_vector(t - 1, row, col),
                    ef_tm1: grid.type_vector(t - 2, row, col),
                    target: grid.counts.get(t, row, col) as f64,
                });
            }
        }
    }
    Ok(Dataset {
        samples,
        t_steps: spec.t_steps,
        t_resolution: spec.t_resolution,
        n_types: grid.n_types(),
    })
}

/// Holds out the final year as the test set; both halves are shuffled.
pub fn split_train_test(dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let year = dataset.t_resolution.steps_per_year();
    if dataset.t_steps <= year {
        return Err(Error::InvalidParameter(format!(
            "dataset spans {} steps, at most one year ({year})",
            dataset.t_steps
        )));
    }
    let first_test_step = dataset.t_steps - year;
    let (mut test, mut train): (Vec<Sample>, Vec<Sample>) = dataset
        .samples
        .iter()
        .cloned()
        .partition(|s| s.t >= first_test_step);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((dataset.with_samples(train), dataset.with_samples(test)))
}

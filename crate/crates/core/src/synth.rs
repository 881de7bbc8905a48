//! Synthetic count grids with independently controlled temporal and spatial
//! correlation.
//!
//! Each cell carries `base_rate + z_t` where `z` is an AR(p) process whose
//! innovations are white noise smoothed by a truncated Gaussian kernel in
//! space. Counts are `round(base_rate + z)` clipped at zero rather than
//! Poisson draws, so the injected correlation survives almost untouched.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CountTensor, Crs, GridSpec, SpatioTemporalGrid, TimeResolution};

/// Steps simulated and discarded so the AR process starts in equilibrium.
const BURN_IN: usize = 100;
/// Kernel standard deviation as a fraction of the truncation radius.
const SIGMA_PER_RADIUS: f64 = 0.6;
pub const TYPE_NAMES: [&str; 2] = ["type_a", "type_b"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub rows: usize,
    pub cols: usize,
    pub t_steps: usize,
    /// At most two AR coefficients; empty means white noise in time.
    pub temporal_coeffs: Vec<f64>,
    /// Kernel truncation radius in cells; 0 disables smoothing.
    pub spatial_kernel_radius: usize,
    /// Ratio of the kernel's x spread to its y spread; 1 is isotropic.
    pub anisotropy: f64,
    pub base_rate: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            rows: 24,
            cols: 24,
            t_steps: 300,
            temporal_coeffs: Vec::new(),
            spatial_kernel_radius: 0,
            anisotropy: 1.0,
            base_rate: 20.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.t_steps == 0 {
            return Err(Error::InvalidParameter(
                "synthetic grid dimensions must be positive".into(),
            ));
        }
        if !(self.base_rate > 0.0) || !self.base_rate.is_finite() {
            return Err(Error::InvalidParameter("base_rate must be positive".into()));
        }
        if !(self.anisotropy >= 1.0) || !self.anisotropy.is_finite() {
            return Err(Error::InvalidParameter(
                "anisotropy must be at least 1".into(),
            ));
        }
        let stationary = match *self.temporal_coeffs.as_slice() {
            [] => true,
            [a] => a.abs() < 1.0,
            [a, b] => b.abs() < 1.0 && a + b < 1.0 && b - a < 1.0,
            _ => {
                return Err(Error::InvalidParameter(
                    "at most two AR coefficients are supported".into(),
                ))
            }
        };
        if !stationary || self.temporal_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "AR coefficients {:?} are not stationary",
                self.temporal_coeffs
            )));
        }
        Ok(())
    }

    fn spec(&self) -> GridSpec {
        GridSpec {
            rows: self.rows,
            cols: self.cols,
            origin: (0.0, 0.0),
            cell_size: (1.0, 1.0),
            t_steps: self.t_steps,
            t_resolution: TimeResolution::Monthly,
            crs: Crs::Local,
            t_start: NaiveDate::from_ymd_opt(2000, 1, 1),
        }
    }
}

/// Truncated Gaussian kernel scaled to unit L2 norm, so smoothed unit white
/// noise keeps unit variance. Returned as `(half_width_x, half_width_y, w)`.
fn kernel(radius: usize, anisotropy: f64) -> (usize, usize, Vec<f64>) {
    if radius == 0 {
        return (0, 0, vec![1.0]);
    }
    let sy = SIGMA_PER_RADIUS * radius as f64;
    let sx = sy * anisotropy;
    let hx = (radius as f64 * anisotropy).ceil() as usize;
    let hy = radius;
    let mut w = Vec::with_capacity((2 * hx + 1) * (2 * hy + 1));
    for dy in -(hy as i64)..=hy as i64 {
        for dx in -(hx as i64)..=hx as i64 {
            let (x, y) = (dx as f64, dy as f64);
            w.push((-(x * x) / (2.0 * sx * sx) - (y * y) / (2.0 * sy * sy)).exp());
        }
    }
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    (hx, hy, w)
}

pub fn generate(params: &SynthParams) -> Result<SpatioTemporalGrid> {
    params.validate()?;
    let (rows, cols) = (params.rows, params.cols);
    let n = rows * cols;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let share_a: f64 = rng.gen_range(0.3..0.7);
    let (hx, hy, w) = kernel(params.spatial_kernel_radius, params.anisotropy);
    let (pw, ph) = (cols + 2 * hx, rows + 2 * hy);
    let kw = 2 * hx + 1;
    let std = params.base_rate.sqrt();

    let mut padded = vec![0.0; pw * ph];
    let mut innov = vec![0.0; n];
    let mut z1 = vec![0.0; n];
    let mut z2 = vec![0.0; n];
    let mut a = CountTensor::zeros(params.t_steps, rows, cols);
    let mut b = CountTensor::zeros(params.t_steps, rows, cols);
    let coeff = |i: usize| params.temporal_coeffs.get(i).copied().unwrap_or(0.0);
    let (phi1, phi2) = (coeff(0), coeff(1));

    for step in 0..BURN_IN + params.t_steps {
        padded
            .iter_mut()
            .for_each(|v| *v = rng.sample(StandardNormal));
        for r in 0..rows {
            for c in 0..cols {
                let mut acc = 0.0;
                for ky in 0..=2 * hy {
                    let base = (r + ky) * pw + c;
                    let wrow = &w[ky * kw..(ky + 1) * kw];
                    acc += wrow
                        .iter()
                        .zip(&padded[base..base + kw])
                        .map(|(k, v)| k * v)
                        .sum::<f64>();
                }
                innov[r * cols + c] = std * acc;
            }
        }
        for i in 0..n {
            let z = phi1 * z1[i] + phi2 * z2[i] + innov[i];
            z2[i] = z1[i];
            z1[i] = z;
        }
        if step < BURN_IN {
            continue;
        }
        let t = step - BURN_IN;
        let off = t * n;
        for i in 0..n {
            let count = (params.base_rate + z1[i]).round().max(0.0) as u32;
            let na = (share_a * count as f64).round() as u32;
            a.data[off + i] = na;
            b.data[off + i] = count - na;
        }
    }
    let per_type = BTreeMap::from([
        (TYPE_NAMES[0].to_string(), a),
        (TYPE_NAMES[1].to_string(), b),
    ]);
    SpatioTemporalGrid::from_types(params.spec(), per_type)
}

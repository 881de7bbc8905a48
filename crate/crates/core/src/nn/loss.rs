use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian distance kernel `exp(-(d/h)^2 / 2)`.
pub fn weight_kernel(d: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "distance must be non-negative, got {d}"
        )));
    }
    Ok(gaussian(d, h))
}

#[inline]
fn gaussian(d: f64, h: f64) -> f64 {
    let r = d / h;
    (-0.5 * r * r).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum LossKind {
    /// Mean squared error over the unmasked outputs.
    PlainMse,
    /// `0.5 * sum v_i (t_i - o_i)^2` with `v_i = exp(-(d_i/h)^2 / 2)`.
    SpatialWeighted { bandwidth_h: f64 },
    /// As [`LossKind::SpatialWeighted`] times a temporal Gaussian on the step
    /// offset `tau`: `v = exp(-(d/h)^2/2 - (tau/h_t)^2/2)`.
    SpatiotemporalWeighted { bandwidth_h: f64, bandwidth_ht: f64 },
}

impl LossKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LossKind::PlainMse => "plain_mse",
            LossKind::SpatialWeighted { .. } => "spatial_weighted",
            LossKind::SpatiotemporalWeighted { .. } => "spatiotemporal_weighted",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |h: f64| h > 0.0 && h.is_finite();
        match *self {
            LossKind::PlainMse => Ok(()),
            LossKind::SpatialWeighted { bandwidth_h } if ok(bandwidth_h) => Ok(()),
            LossKind::SpatiotemporalWeighted {
                bandwidth_h,
                bandwidth_ht,
            } if ok(bandwidth_h) && ok(bandwidth_ht) => Ok(()),
            _ => Err(Error::InvalidParameter(
                "loss bandwidths must be positive".into(),
            )),
        }
    }

    /// Loss weight of one output entry before masking.
    pub fn entry_weight(&self, distance_km: f64, time_offset: f64) -> f64 {
        match *self {
            LossKind::PlainMse => 1.0,
            LossKind::SpatialWeighted { bandwidth_h } => gaussian(distance_km, bandwidth_h),
            LossKind::SpatiotemporalWeighted {
                bandwidth_h,
                bandwidth_ht,
            } => gaussian(distance_km, bandwidth_h) * gaussian(time_offset, bandwidth_ht),
        }
    }

    /// Loss of one sample and its gradient with respect to `outputs`.
    ///
    /// `mask[i] == false` removes entry `i` entirely; `time_offsets` may be
    /// empty for purely spatial blocks.
    pub fn sample_loss(
        &self,
        outputs: &[f64],
        targets: &[f64],
        mask: &[bool],
        distances: &[f64],
        time_offsets: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let n = outputs.len();
        if targets.len() != n || mask.len() != n || distances.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: targets.len(),
            });
        }
        let active = mask.iter().filter(|&&m| m).count();
        if active == 0 {
            return Err(Error::FullyMasked);
        }
        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        match self {
            LossKind::PlainMse => {
                let k = active as f64;
                for i in (0..n).filter(|&i| mask[i]) {
                    let r = outputs[i] - targets[i];
                    loss += r * r / k;
                    grad[i] = 2.0 * r / k;
                }
            }
            _ => {
                for i in (0..n).filter(|&i| mask[i]) {
                    let tau = time_offsets.get(i).copied().unwrap_or(0.0);
                    let v = self.entry_weight(distances[i], tau);
                    let r = outputs[i] - targets[i];
                    loss += 0.5 * v * r * r;
                    grad[i] = v * r;
                }
            }
        }
        Ok((loss, grad))
    }
}

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const LENGTH_SCALE: f64 = 0.3;
pub const NOISE: f64 = 1e-6;

fn se_kernel(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-d2 / (2.0 * LENGTH_SCALE * LENGTH_SCALE)).exp()
}

/// Zero-mean GP with unit signal variance fitted to standardized targets.
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    mean: f64,
    scale: f64,
}

impl GaussianProcess {
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n = y.len();
        if n == 0 || x.len() != n {
            return Err(Error::InvalidParameter(
                "GP needs matching, non-empty data".into(),
            ));
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - mean) / scale));
        let mut noise = NOISE;
        let chol = loop {
            let k = DMatrix::from_fn(n, n, |i, j| {
                se_kernel(&x[i], &x[j]) + if i == j { noise } else { 0.0 }
            });
            if let Some(c) = k.cholesky() {
                break c;
            }
            noise *= 10.0;
            if noise > 1.0 {
                return Err(Error::InvalidParameter(
                    "GP covariance is not positive definite".into(),
                ));
            }
        };
        let alpha = chol.solve(&ys);
        Ok(GaussianProcess {
            x: x.to_vec(),
            chol: chol.l(),
            alpha,
            mean,
            scale,
        })
    }

    /// Posterior mean and standard deviation on the standardized scale.
    pub fn posterior(&self, queries: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let n = self.x.len();
        let ks = DMatrix::from_fn(n, queries.len(), |i, j| se_kernel(&self.x[i], &queries[j]));
        let mu = ks.transpose() * &self.alpha;
        let v = self
            .chol
            .solve_lower_triangular(&ks)
            .expect("Cholesky factor has a positive diagonal");
        (0..queries.len())
            .map(|j| {
                let var = 1.0 - v.column(j).norm_squared();
                (mu[j], var.max(0.0).sqrt())
            })
            .collect()
    }

    /// Expected improvement below `best` (an observed, unstandardized value).
    pub fn expected_improvement(&self, queries: &[Vec<f64>], best: f64) -> Vec<f64> {
        let best = (best - self.mean) / self.scale;
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        self.posterior(queries)
            .into_iter()
            .map(|(mu, sd)| {
                let imp = best - mu;
                if sd < 1e-12 {
                    return imp.max(0.0);
                }
                let z = imp / sd;
                (imp * normal.cdf(z) + sd * normal.pdf(z)).max(0.0)
            })
            .collect()
    }
}

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Correlation values per lag with a symmetric significance band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCurve {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// Half-width of the band around zero, per lag.
    pub band: Vec<f64>,
    pub n: usize,
    pub alpha: f64,
}

impl CorrelationCurve {
    pub fn max_lag(&self) -> usize {
        self.lags.last().copied().unwrap_or(0)
    }

    /// True when lag `k` exists and lies outside the band.
    pub fn significant(&self, k: usize) -> bool {
        k < self.values.len() && self.values[k].abs() > self.band[k]
    }

    /// `lag,value,lower,upper` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,value,band_lower,band_upper\n");
        for ((lag, v), b) in self.lags.iter().zip(&self.values).zip(&self.band) {
            out.push_str(&format!("{lag},{v},{},{b}\n", -b));
        }
        out
    }
}

/// Two-sided normal critical value `z_{1 - alpha/2}`.
pub fn z_critical(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - alpha / 2.0))
}

fn centered(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum();
    if !(ss > 0.0) || !ss.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok((c, ss))
}

/// Autocorrelation with lag-normalised covariance,
///
/// `rho(k) = [1/(n-k) sum_{t>k} d_t d_{t-k}] /
///           (sqrt(1/n sum d_t^2) * sqrt(1/(n-k) sum_{t>k} d_{t-k}^2))`
///
/// where `d` is the demeaned series, and the cumulative band
/// `z * sqrt((1 + 2 sum_{i=1..k} rho(i)^2) / n)`. Values are clamped to
/// `[-1, 1]`; `rho(0)` is exactly 1.
pub fn acf(series: &[f64], max_lag: usize, alpha: f64) -> Result<CorrelationCurve> {
    let n = series.len();
    if n <= max_lag + 1 {
        return Err(Error::InvalidParameter(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let z = z_critical(alpha)?;
    let (d, ss) = centered(series)?;
    let total_var = ss / n as f64;

    let mut values = Vec::with_capacity(max_lag + 1);
    values.push(1.0);
    for k in 1..=max_lag {
        let m = (n - k) as f64;
        let cov: f64 = (k..n).map(|t| d[t] * d[t - k]).sum::<f64>() / m;
        let lagged_var: f64 = d[..n - k].iter().map(|v| v * v).sum::<f64>() / m;
        let den = total_var.sqrt() * lagged_var.sqrt();
        let rho = if den > 0.0 {
            (cov / den).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        values.push(rho);
    }

    let mut band = Vec::with_capacity(max_lag + 1);
    let mut cum = 0.0;
    for k in 0..=max_lag {
        if k > 0 {
            cum += values[k] * values[k];
        }
        band.push(z * ((1.0 + 2.0 * cum) / n as f64).sqrt());
    }
    Ok(CorrelationCurve {
        lags: (0..=max_lag).collect(),
        values,
        band,
        n,
        alpha,
    })
}

/// Sample autocorrelation with the `1/n` covariance normalisation, which
/// keeps the Toeplitz system positive definite.
pub fn sample_autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    let (d, ss) = centered(series)?;
    Ok((0..=max_lag.min(n - 1))
        .map(|k| (k..n).map(|t| d[t] * d[t - k]).sum::<f64>() / ss)
        .collect())
}

/// Durbin-Levinson recursion over autocorrelations `r[0..=m]`, returning
/// `phi(k, k)` for `k = 1..=m`.
pub fn durbin_levinson(r: &[f64]) -> Vec<f64> {
    let m = r.len().saturating_sub(1);
    let mut out = Vec::with_capacity(m);
    let mut phi: Vec<f64> = Vec::with_capacity(m);
    let mut err = r[0];
    for k in 1..=m {
        let num = r[k] - (1..k).map(|j| phi[j - 1] * r[k - j]).sum::<f64>();
        let kk = if err > 0.0 { num / err } else { 0.0 };
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - kk * prev[k - j - 1];
        }
        phi.push(kk);
        err *= 1.0 - kk * kk;
        out.push(kk);
    }
    out
}

/// Partial autocorrelation by Durbin-Levinson, with band `z / sqrt(n)`.
/// `values[0]` is 1 by convention.
pub fn pacf(series: &[f64], max_lag: usize, alpha: f64) -> Result<CorrelationCurve> {
    let n = series.len();
    if max_lag == 0 || max_lag * 4 >= n {
        return Err(Error::InvalidParameter(format!(
            "pacf lag {max_lag} must be positive and below n/4 (n = {n})"
        )));
    }
    let z = z_critical(alpha)?;
    let r = sample_autocorrelation(series, max_lag)?;
    let mut values = vec![1.0];
    values.extend(durbin_levinson(&r));
    let half = z / (n as f64).sqrt();
    Ok(CorrelationCurve {
        lags: (0..=max_lag).collect(),
        values,
        band: vec![half; max_lag + 1],
        n,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    fn ar(coeffs: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 200;
        let mut x = vec![0.0; n + burn];
        for t in 0..n + burn {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[t] = e + coeffs
                .iter()
                .enumerate()
                .filter(|(i, _)| t > *i)
                .map(|(i, a)| a * x[t - i - 1])
                .sum::<f64>();
        }
        x.split_off(burn)
    }

    /// Least-squares lag regression on the demeaned, zero-padded series.
    fn ols_last_coefficient(series: &[f64], k: usize) -> f64 {
        let n = series.len();
        let mean = series.iter().sum::<f64>() / n as f64;
        let d: Vec<f64> = series.iter().map(|v| v - mean).collect();
        let at = |i: i64| {
            if i >= 0 && (i as usize) < n {
                d[i as usize]
            } else {
                0.0
            }
        };
        let rows = n + k;
        let x = DMatrix::from_fn(rows, k, |t, j| at(t as i64 - j as i64 - 1));
        let y = DVector::from_fn(rows, |t, _| at(t as i64));
        let beta = x.svd(true, true).solve(&y, 1e-14).unwrap();
        beta[k - 1]
    }

    #[test]
    fn acf_lag_zero_is_exactly_one() {
        let c = acf(&ar(&[0.3], 100, 1), 10, 0.05).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert!(c.values.iter().all(|v| v.abs() <= 1.0));
        assert!(c.band.iter().all(|&b| b > 0.0));
        assert!(c.band.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn white_noise_lag_one_is_small() {
        let c = acf(&ar(&[], 1000, 7), 5, 0.05).unwrap();
        assert!(c.values[1].abs() < 3.0 / 1000f64.sqrt());
    }

    #[test]
    fn ar1_acf_recovers_coefficient() {
        let c = acf(&ar(&[0.7], 5000, 3), 3, 0.05).unwrap();
        assert!((c.values[1] - 0.7).abs() < 0.05, "{}", c.values[1]);
    }

    #[test]
    fn zero_variance_is_an_error() {
        assert!(matches!(acf(&[2.0; 30], 3, 0.05), Err(Error::ZeroVariance)));
        assert!(matches!(
            pacf(&[2.0; 30], 3, 0.05),
            Err(Error::ZeroVariance)
        ));
        assert!(acf(&[1.0, 2.0, 3.0], 2, 0.05).is_err());
        assert!(pacf(&ar(&[], 40, 1), 10, 0.05).is_err());
    }

    #[test]
    fn ar1_pacf_cuts_off_after_lag_one() {
        let c = pacf(&ar(&[0.7], 2000, 5), 10, 0.05).unwrap();
        assert!((c.values[1] - 0.7).abs() < 0.05);
        assert!(!c.significant(2), "{}", c.values[2]);
    }

    #[test]
    fn pacf_matches_lag_regression() {
        for (seed, coeffs) in [
            (1u64, vec![0.5, 0.3]),
            (2, vec![0.8]),
            (3, vec![]),
            (4, vec![0.2, -0.4]),
        ] {
            let x = ar(&coeffs, 400, seed);
            let c = pacf(&x, 10, 0.05).unwrap();
            for k in 1..=10 {
                let ols = ols_last_coefficient(&x, k);
                assert!(
                    (c.values[k] - ols).abs() < 1e-6,
                    "k={k}: {} vs {ols}",
                    c.values[k]
                );
            }
        }
    }

    #[test]
    fn detrended_noise_stays_inside_band() {
        let noise = ar(&[], 600, 11);
        let trend: Vec<f64> = noise
            .iter()
            .enumerate()
            .map(|(t, e)| 0.05 * t as f64 + e)
            .collect();
        // Remove the fitted linear trend.
        let n = trend.len() as f64;
        let tm = (n - 1.0) / 2.0;
        let ym = trend.iter().sum::<f64>() / n;
        let sxy: f64 = trend
            .iter()
            .enumerate()
            .map(|(t, y)| (t as f64 - tm) * (y - ym))
            .sum();
        let sxx: f64 = (0..trend.len()).map(|t| (t as f64 - tm).powi(2)).sum();
        let slope = sxy / sxx;
        let resid: Vec<f64> = trend
            .iter()
            .enumerate()
            .map(|(t, y)| y - ym - slope * (t as f64 - tm))
            .collect();
        let c = pacf(&resid, 10, 0.01).unwrap();
        assert!((1..=10).all(|k| !c.significant(k)), "{:?}", c.values);
    }

    #[test]
    fn csv_has_band_columns() {
        let c = pacf(&ar(&[0.5], 100, 2), 2, 0.05).unwrap();
        let csv = c.to_csv();
        assert!(csv.starts_with("lag,value,band_lower,band_upper\n0,1,"));
        assert_eq!(csv.lines().count(), 4);
    }
}

//! Temporal and spatial correlation diagnostics and the architecture
//! prescription they imply.

mod correlation;
mod d4;
mod isotropy;
mod prescribe;
mod spatial;

pub use correlation::{
    acf, durbin_levinson, pacf, sample_autocorrelation, z_critical, CorrelationCurve,
};
pub use d4::{augment_grid, d4_transforms, rot90, transform_grid, transpose, D4};
pub use isotropy::{
    isotropy_test, IsotropyConfig, IsotropyReport, DEFAULT_SAMPLE_FRAC, DEFAULT_THRESHOLD,
    DEFAULT_WINDOW,
};
pub use prescribe::{prescribe, recommend, Prescription};
pub use spatial::{spatial_pacf, spatial_pacf_of_map, Axis, SliceScope, TOP_SLICES};

use crate::error::{Error, Result};
use crate::eval::time_averaged_map;
use crate::ingest::SpatioTemporalGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    pub alpha: f64,
    /// Defaults to `min(40, n - 2)`.
    pub acf_max_lag: Option<usize>,
    /// Defaults to `min(30, (n - 1) / 4)`.
    pub pacf_max_lag: Option<usize>,
    /// Defaults to `min(5, (L - 1) / 4)` for slice length `L`.
    pub spatial_max_lag: Option<usize>,
    pub isotropy: IsotropyConfig,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            alpha: 0.05,
            acf_max_lag: None,
            pacf_max_lag: None,
            spatial_max_lag: None,
            isotropy: IsotropyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub temporal_acf: CorrelationCurve,
    pub temporal_pacf: CorrelationCurve,
    pub spatial_x: CorrelationCurve,
    pub spatial_y: CorrelationCurve,
    pub spatial_hd_x: CorrelationCurve,
    pub spatial_hd_y: CorrelationCurve,
    /// `None` when the grid is smaller than the isotropy window.
    pub isotropy: Option<IsotropyReport>,
    pub prescription: Prescription,
}

/// Runs every diagnostic on a grid. The temporal curves use the city-wide
/// total series.
pub fn diagnose(grid: &SpatioTemporalGrid, cfg: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    let series = grid.total_series();
    let n = series.len();
    if n < 9 {
        return Err(Error::InvalidGrid(format!(
            "need at least 9 time steps, have {n}"
        )));
    }
    let acf_lag = cfg.acf_max_lag.unwrap_or(40.min(n - 2));
    let pacf_lag = cfg.pacf_max_lag.unwrap_or(30.min((n - 1) / 4));
    let temporal_acf = acf(&series, acf_lag, cfg.alpha)?;
    let temporal_pacf = pacf(&series, pacf_lag, cfg.alpha)?;

    let map = time_averaged_map(grid, 0..grid.spec.t_steps)?;
    let lag_for = |len: usize| {
        cfg.spatial_max_lag
            .unwrap_or(5.min(len.saturating_sub(1) / 4).max(1))
    };
    let (x_lag, y_lag) = (lag_for(grid.spec.cols), lag_for(grid.spec.rows));
    let spatial_x = spatial_pacf_of_map(&map, Axis::X, SliceScope::All, x_lag, cfg.alpha)?;
    let spatial_y = spatial_pacf_of_map(&map, Axis::Y, SliceScope::All, y_lag, cfg.alpha)?;
    let spatial_hd_x = spatial_pacf_of_map(&map, Axis::X, SliceScope::TopSlices, x_lag, cfg.alpha)?;
    let spatial_hd_y = spatial_pacf_of_map(&map, Axis::Y, SliceScope::TopSlices, y_lag, cfg.alpha)?;

    let fits = cfg.isotropy.window <= grid.spec.rows.min(grid.spec.cols);
    let isotropy = if fits {
        Some(isotropy_test(grid, &cfg.isotropy)?)
    } else {
        None
    };

    let prescription = prescribe(
        &temporal_pacf,
        &spatial_x,
        &spatial_y,
        &spatial_hd_x,
        &spatial_hd_y,
    );
    Ok(DiagnosticsReport {
        temporal_acf,
        temporal_pacf,
        spatial_x,
        spatial_y,
        spatial_hd_x,
        spatial_hd_y,
        isotropy,
        prescription,
    })
}

impl DiagnosticsReport {
    /// Named curves, in a fixed order, for CSV export.
    pub fn curves(&self) -> [(&'static str, &CorrelationCurve); 6] {
        [
            ("temporal_acf", &self.temporal_acf),
            ("temporal_pacf", &self.temporal_pacf),
            ("spatial_pacf_x", &self.spatial_x),
            ("spatial_pacf_y", &self.spatial_y),
            ("spatial_pacf_hd_x", &self.spatial_hd_x),
            ("spatial_pacf_hd_y", &self.spatial_hd_y),
        ]
    }

    /// Plain-text summary table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("curve               lag1      band1     lag2      band2\n");
        for (name, c) in self.curves() {
            let cell = |k: usize| {
                if k < c.values.len() {
                    format!("{:<9.4} {:<9.4}", c.values[k], c.band[k])
                } else {
                    format!("{:<9} {:<9}", "-", "-")
                }
            };
            out.push_str(&format!("{name:<19} {} {}\n", cell(1), cell(2)));
        }
        match &self.isotropy {
            Some(iso) => {
                out.push_str(&format!(
                    "isotropy            max deviation {:.4} (threshold {:.2}) -> {}\n",
                    iso.max_deviation(),
                    iso.threshold,
                    if iso.isotropic {
                        "isotropic"
                    } else {
                        "not isotropic"
                    }
                ));
                for (t, d) in &iso.symmetry_deviations {
                    out.push_str(&format!("  {t:<18} {d:.4}\n"));
                }
            }
            None => out.push_str("isotropy            grid smaller than window, skipped\n"),
        }
        let p = &self.prescription;
        out.push_str(&format!(
            "temporal lag-1 and lag-2 significant: {}\n\
             high-density spatial lag-1 significant: {}\n\
             general spatial lag-1 significant: {}\n\
             history-dependent models appropriate: {}\n\
             recommendation: {}\n",
            p.temporal_significant,
            p.spatial_significant,
            p.general_spatial_significant,
            p.history_dependent_appropriate,
            p.recommendation
        ));
        out
    }

    /// `transform,deviation` rows, empty when isotropy was skipped.
    pub fn isotropy_csv(&self) -> String {
        let mut out = String::from("transform,deviation\n");
        if let Some(iso) = &self.isotropy {
            for (t, d) in &iso.symmetry_deviations {
                out.push_str(&format!("{t},{d}\n"));
            }
        }
        out
    }
}

use serde::Serialize;

use super::correlation::CorrelationCurve;
use crate::models::ArchKind;

/// Architecture recommendation derived from the correlation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Prescription {
    pub recommendation: ArchKind,
    /// Temporal PACF significant at both lag 1 and lag 2.
    pub temporal_significant: bool,
    /// Lag-1 spatial PACF of the high-density slices significant on both axes.
    pub spatial_significant: bool,
    /// Lag-1 spatial PACF over all slices significant on both axes.
    pub general_spatial_significant: bool,
    /// History-dependent wirings need a significant lag-2 temporal PACF.
    pub history_dependent_appropriate: bool,
}

/// The decision table on its own.
pub fn recommend(temporal_significant: bool, spatial_significant: bool) -> ArchKind {
    match (temporal_significant, spatial_significant) {
        (true, true) => ArchKind::HdgtwnnLs,
        (true, false) => ArchKind::Hdgtwnn,
        (false, true) => ArchKind::GtwnnLs,
        (false, false) => ArchKind::Gtwnn,
    }
}

pub fn prescribe(
    temporal: &CorrelationCurve,
    spatial_x: &CorrelationCurve,
    spatial_y: &CorrelationCurve,
    spatial_hd_x: &CorrelationCurve,
    spatial_hd_y: &CorrelationCurve,
) -> Prescription {
    let lag2 = temporal.significant(2);
    let temporal_significant = temporal.significant(1) && lag2;
    let spatial_significant = spatial_hd_x.significant(1) && spatial_hd_y.significant(1);
    Prescription {
        recommendation: recommend(temporal_significant, spatial_significant),
        temporal_significant,
        spatial_significant,
        general_spatial_significant: spatial_x.significant(1) && spatial_y.significant(1),
        history_dependent_appropriate: lag2,
    }
}

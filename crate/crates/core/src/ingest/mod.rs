//! Raw event parsing, projection, gridding and dataset construction.

mod dataset;
mod grid;
mod projection;
mod records;

pub use dataset::{
    build_dataset, build_dataset_with, split_train_test, Dataset, DatasetOptions, Sample,
};
pub use grid::{
    compute_grid_dims, fit_grid_spec, histogram, CountTensor, Extent, GridSpec, HistogramOutcome,
    SpatioTemporalGrid, TimeResolution, SQUARE_TOLERANCE,
};
pub use projection::{project_coords, Crs, TransverseMercator, BNG, UTM17N};
pub use records::{parse_date, parse_records, EventRecord, ParseOutcome, Schema};

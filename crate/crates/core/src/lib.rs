//! Geographically and temporally weighted neural networks for gridded
//! spatiotemporal count prediction, with the correlation diagnostics used to
//! choose between them and a Bayesian-optimization architecture search.

pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod models;
pub mod nas;
pub mod nn;
pub mod synth;

pub use error::{Error, Result};

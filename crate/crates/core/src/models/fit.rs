use crate::error::Result;
use crate::eval::{metrics, EvalReport};
use crate::nn::{train, LossKind, TrainConfig};

use super::arch::ArchitectureSpec;
use super::network::Model;
use super::target::PreparedSample;

/// Builds a model with `init_seed` and trains it; returns the model and the
/// loss trace.
pub fn fit(
    spec: ArchitectureSpec,
    train_set: &[PreparedSample],
    cfg: &TrainConfig,
    loss: &LossKind,
    init_seed: u64,
) -> Result<(Model, Vec<f64>)> {
    let mut model = Model::build(spec, init_seed)?;
    let trace = train(&mut model, train_set, cfg, loss)?;
    Ok((model, trace))
}

/// Center-cell predictions, in sample order.
pub fn predict_all(model: &Model, samples: &[PreparedSample]) -> Result<Vec<f64>> {
    samples.iter().map(|s| model.predict(s)).collect()
}

/// Metrics of the center-cell predictions against the center targets.
pub fn evaluate(model: &Model, samples: &[PreparedSample], epsilon: f64) -> Result<EvalReport> {
    let preds = predict_all(model, samples)?;
    let targets: Vec<f64> = samples.iter().map(PreparedSample::target).collect();
    metrics(&preds, &targets, epsilon)
}

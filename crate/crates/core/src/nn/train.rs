use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::layer::LayerParams;
use super::loss::LossKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 6,
            batch_size: 10,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A model whose parameters are a flat list of dense layers.
pub trait Trainable {
    type Example;

    fn layers(&self) -> &[LayerParams];

    fn layers_mut(&mut self) -> &mut [LayerParams];

    /// Mean per-example loss over `batch` and its exact gradient.
    fn loss_and_grad(
        &self,
        batch: &[&Self::Example],
        loss: &LossKind,
    ) -> Result<(f64, Vec<LayerParams>)>;

    fn loss(&self, batch: &[&Self::Example], loss: &LossKind) -> Result<f64> {
        self.loss_and_grad(batch, loss).map(|(l, _)| l)
    }
}

/// Mini-batch ADAM training.
///
/// Returns the loss trace over the full dataset: entry 0 is the loss before
/// training and entry `e` the loss after epoch `e`.
pub fn train<M: Trainable>(
    model: &mut M,
    data: &[M::Example],
    cfg: &TrainConfig,
    loss: &LossKind,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    loss.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    let all: Vec<&M::Example> = data.iter().collect();
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    trace.push(model.loss(&all, loss)?);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(model.layers());
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&M::Example> = chunk.iter().map(|&i| &data[i]).collect();
            let (_, grads) = model.loss_and_grad(&batch, loss)?;
            adam_step(model.layers_mut(), &grads, &mut state, &cfg.adam)?;
        }
        trace.push(model.loss(&all, loss)?);
    }
    Ok(trace)
}

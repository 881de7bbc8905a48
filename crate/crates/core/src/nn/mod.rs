//! Minimal dense-network engine: parameters, forward/backward passes, the
//! weighted loss family, ADAM and a mini-batch training loop.

mod adam;
mod layer;
mod loss;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layer::{
    backward, forward, init_layers, init_network, relu_margin, Activation, LayerParams, Tape,
};
pub use loss::{weight_kernel, LossKind};
pub use train::{train, TrainConfig, Trainable};

use crate::error::Result;

/// Plain multi-output regressor over a single dense stack; every output
/// entry carries distance 0 so all loss kinds reduce to unweighted forms.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Mlp {
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        Ok(Mlp {
            layers: init_network(sizes, seed)?,
        })
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        forward(
            &self.layers,
            &Activation::block_plan(self.layers.len()),
            input,
        )
        .map(|(o, _)| o)
    }
}

impl Trainable for Mlp {
    type Example = Example;

    fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    fn loss_and_grad(
        &self,
        batch: &[&Example],
        loss: &LossKind,
    ) -> Result<(f64, Vec<LayerParams>)> {
        let plan = Activation::block_plan(self.layers.len());
        let mut total = 0.0;
        let mut grads: Vec<LayerParams> = self.layers.iter().map(LayerParams::zeros_like).collect();
        for ex in batch {
            let (out, tape) = forward(&self.layers, &plan, &ex.input)?;
            let n = out.len();
            let (l, g) = loss.sample_loss(&out, &ex.target, &vec![true; n], &vec![0.0; n], &[])?;
            total += l;
            let (gp, _) = backward(&self.layers, &tape, &g);
            grads.iter_mut().zip(&gp).for_each(|(a, b)| a.accumulate(b));
        }
        let k = 1.0 / batch.len() as f64;
        grads.iter_mut().for_each(|g| g.scale(k));
        Ok((total * k, grads))
    }
}
